import numpy as np
import pytest

from flexlink import DomainError, deflection, jacobian, tip_position
from flexlink.kinematics import tip_velocity
from conftest import random_states


def test_tip_at_diagonal(consts):
    p = tip_position([np.pi / 4, 0.0, 0.0], consts)
    assert (p.x, p.y) == pytest.approx((0.70710678, 0.70710678), abs=1e-8)
    assert np.asarray(p).shape == (2,)


def test_tip_deflection_uses_tip_value(basis):
    assert deflection(1.0, [0.0, 0.01, 0.0], basis) == pytest.approx(0.02)
    with pytest.raises(DomainError):
        deflection(1.5, [0.0, 0.01, 0.0], basis)


def test_jacobian_finite_differences(consts, rng):
    worst = 0.0
    for x in random_states(rng, 1000):
        p = x[0::2]
        jac = jacobian(p, consts)
        fd = np.empty_like(jac)
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1e-6
            fd[:, i] = (np.asarray(tip_position(p + e, consts)) - np.asarray(tip_position(p - e, consts))) / 2e-6
        worst = max(worst, np.abs(jac - fd).max() / np.abs(jac).max())
    assert worst < 1e-6


def test_tip_velocity_is_jacobian_rate(consts, rng):
    x = random_states(rng, 1)[0]
    h = 1e-7
    p, v = x[0::2], x[1::2]
    num = (np.asarray(tip_position(p + h * v, consts)) - np.asarray(tip_position(p - h * v, consts))) / (2 * h)
    assert tip_velocity(x, consts) == pytest.approx(num, rel=1e-6, abs=1e-9)
