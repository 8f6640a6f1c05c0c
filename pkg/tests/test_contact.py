import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flexlink import ConfigurationError, Environment, contact_force, jacobian, reaction_torque

P0 = [0.7071, 0.7071]
N = [0.7071, -0.7071]
coord = st.floats(-2.0, 2.0, allow_nan=False)


def test_zero_at_reference():
    f = contact_force(P0, Environment(P0, N, 86.9))
    assert f.magnitude == 0.0 and f.penetration == 0.0 and not f.in_contact


def test_free_side_gives_nothing():
    env = Environment(P0, N, 86.9)
    assert contact_force([0.8, 0.6], env).magnitude == 0.0


def test_anchored_spring_inside():
    env = Environment(P0, N, 86.9)
    p = np.array([0.6, 0.8])
    f = contact_force(p, env)
    assert f.in_contact
    assert f.force == pytest.approx(86.9 * (p - P0))


def test_frictionless_normal_only():
    env = Environment(P0, N, 86.9, frictionless=True)
    n = np.array(N) / np.hypot(*N)
    p = np.array(P0) - 0.05 * n + 0.3 * np.array([n[1], -n[0]])
    f = contact_force(p, env)
    assert f.penetration == pytest.approx(0.05)
    assert f.force == pytest.approx(-86.9 * 0.05 * n)


def test_bilateral_pulls_back():
    env = Environment(P0, N, 50.0, unilateral=False, frictionless=True)
    n = np.array(N) / np.hypot(*N)
    f = contact_force(np.array(P0) + 0.01 * n, env)
    assert f.in_contact and f.force == pytest.approx(50.0 * 0.01 * n)


def test_matrix_stiffness_and_validation():
    k = [[100.0, 10.0], [10.0, 50.0]]
    env = Environment(P0, N, k)
    n = env.normal
    assert env.normal_stiffness == pytest.approx(n @ np.array(k) @ n)
    with pytest.raises(ConfigurationError, match="not positive definite"):
        Environment(P0, N, [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ConfigurationError, match="not symmetric"):
        Environment(P0, N, [[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ConfigurationError):
        Environment(P0, [0.0, 0.0], 1.0)


def test_reaction_torque(consts):
    p = [np.pi / 4, 0.01, -0.002]
    jac = jacobian(p, consts)
    f = contact_force([0.6, 0.8], Environment(P0, N, 86.9))
    assert reaction_torque(jac, f) == pytest.approx(jac.T @ f.force)


@settings(max_examples=200, deadline=None)
@given(coord, coord)
def test_linear_in_penetration(x, y):
    env = Environment(P0, N, 86.9)
    d = np.array([x, y]) - P0
    f1 = contact_force(np.array(P0) + d, env)
    f2 = contact_force(np.array(P0) + 2 * d, env)
    if f1.in_contact:
        assert f2.force == pytest.approx(2 * f1.force, rel=1e-12, abs=1e-12)
    else:
        assert f1.magnitude == 0.0
    assert f1.penetration >= 0.0
