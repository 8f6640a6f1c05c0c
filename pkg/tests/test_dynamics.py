import numpy as np
import pytest

from flexlink import BeamParams, ModalBasis, dynamics_matrices, make_state, rk4_step, state_derivative, total_energy
from flexlink.dynamics import coordinates, pack_coefficients
from conftest import random_states

X = np.linspace(0.0, 1.0, 20001)


def kinetic_hessian(basis, consts, p):
    """M from quadrature of 1/2 rho A int |dP/dt|^2 plus the hub."""
    theta, q = p[0], p[1:]
    phi = basis.transform(X)
    w = phi @ q
    c, s = np.cos(theta), np.sin(theta)
    cols = [np.stack([-X * s - w * c, X * c - w * s])]
    cols += [np.stack([-phi[:, j] * s, phi[:, j] * c]) for j in range(len(q))]
    rho_a = basis.beam_.linear_density
    n = len(cols)
    m = np.empty((n, n))
    for i in range(n):
        for k in range(n):
            m[i, k] = rho_a * np.trapezoid((cols[i] * cols[k]).sum(0), X)
    m[0, 0] += consts.b8
    return m


def potential(basis, p):
    theta, q = p[0], p[1:]
    phi = basis.transform(X)
    w = phi @ q
    beam = basis.beam_
    py = X * np.sin(theta) + w * np.cos(theta)
    curv = ModalBasis(derivative=2).fit(beam).transform(X) @ q
    return beam.linear_density * beam.gravity * np.trapezoid(py, X) + 0.5 * beam.flexural_rigidity * np.trapezoid(
        curv**2, X
    )


def two_mode_rows(x, u, c):
    """Accelerations of the two-mode arm, expanded by hand."""
    thd, q, qd = x[1], x[2::2], x[3::2]
    g, cs, sn = c.gravity, np.cos(x[0]), np.sin(x[0])
    d = c.b8 + c.link_inertia - c.b1.sum() + (c.b0 * q * q).sum()
    num = u[0] - (c.b3 * u[1:]).sum()
    num -= (q * (2 * c.b0 * qd * thd + c.b2 * thd**2 - c.b3 * c.b6 - c.b5 * g * sn)).sum()
    num += (c.b2 * c.b7).sum() * g * cs - c.b4 * g * cs
    thdd = num / d
    qdd = thd**2 * q - c.b3 * thdd - c.b7 * g * cs - c.b6 / c.b0 * q + u[1:] / c.b0
    return np.concatenate([[thdd], qdd])


def test_mass_matches_kinetic_energy(basis, consts, rng):
    for x in random_states(rng, 5):
        p, _ = coordinates(x)
        assert dynamics_matrices(x, consts).M == pytest.approx(kinetic_hessian(basis, consts, p), rel=1e-7, abs=1e-8)


def test_gravity_and_elastic_are_potential_gradient(basis, consts, rng):
    for x in random_states(rng, 3):
        p, _ = coordinates(x)
        d = dynamics_matrices(x, consts)
        grad = np.empty(3)
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1e-6
            grad[i] = (potential(basis, p + e) - potential(basis, p - e)) / 2e-6
        assert d.g + d.eta == pytest.approx(grad, rel=1e-6, abs=1e-7)


def test_coriolis_from_lagrangian(consts, rng):
    # C p' = M' p' - 1/2 grad_p (p'^T M p')
    for x in random_states(rng, 20):
        p, v = coordinates(x)
        h = 1e-6

        def m_at(pp):
            return dynamics_matrices(make_state(pp[0], 0, pp[1:], np.zeros(2)), consts).M

        m_dot = (m_at(p + h * v) - m_at(p - h * v)) / (2 * h)
        grad = np.array(
            [
                (v @ m_at(p + h * e) @ v - v @ m_at(p - h * e) @ v) / (2 * h)
                for e in np.eye(3)
            ]
        )
        cv = dynamics_matrices(x, consts).C @ v
        assert cv == pytest.approx(m_dot @ v - 0.5 * grad, rel=1e-6, abs=1e-9)


def test_two_mode_rows(consts, rng):
    xs = random_states(rng, 1000)
    us = rng.uniform(-5, 5, (1000, 3))
    worst = 0.0
    for x, u in zip(xs, us):
        a = state_derivative(x, u, consts)[1::2]
        ref = two_mode_rows(x, u, consts)
        dense = dynamics_matrices(x, consts).accelerations(x, u)
        worst = max(worst, np.abs(a - ref).max() / max(1.0, np.abs(ref).max()))
        assert a == pytest.approx(dense, rel=1e-9, abs=1e-9)
    assert worst < 1e-10


def test_mass_spd_and_skew(consts, rng):
    for x in random_states(rng, 200, q_scale=0.5):
        p, v = coordinates(x)
        d = dynamics_matrices(x, consts)
        assert np.all(np.linalg.eigvalsh(d.M) > 0)
        m_dot = np.zeros((3, 3))
        m_dot[0, 0] = 2 * (consts.b0 * p[1:] * v[1:]).sum()
        n = m_dot - 2 * d.C
        assert np.abs(n + n.T).max() < 1e-9


def test_free_rotation(far_wall):
    beam = BeamParams.circular(0.01, length=1.0, density=2700.0, gravity=0.0)
    c = ModalBasis().fit(beam).constants_
    x = make_state(0.2, 1.5, [0, 0], [0, 0])
    nxt = rk4_step(x, np.zeros(3), c, far_wall, 1e-3)
    assert nxt[0] == pytest.approx(0.2 + 1.5e-3, abs=1e-15)
    assert nxt[1] == 1.5 and np.all(nxt[2:] == 0)


@pytest.fixture(scope="module")
def weightless():
    beam = BeamParams.circular(0.01, flexural_rigidity=34.3612, length=1.0, density=2700.0, gravity=0.0)
    return ModalBasis().fit(beam).constants_


def _roll(x, consts, env, h, t):
    coef = pack_coefficients(consts)
    for _ in range(int(round(t / h))):
        x = rk4_step(x, np.zeros(3), coef, env, h)
    return x


def test_energy_conserved_at_fine_step(weightless, far_wall):
    x0 = make_state(0.0, 0.5, [1e-3, 1e-4], [1e-2, 1e-2])
    e0 = sum(total_energy(x0, weightless))
    x = _roll(x0, weightless, far_wall, 1e-5, 0.5)
    assert abs(sum(total_energy(x, weightless)) - e0) / e0 < 1e-9


def test_rk4_order(weightless, far_wall):
    x0 = make_state(0.0, 0.5, [1e-3, 1e-4], [1e-2, 1e-2])
    t = 0.01
    ref = _roll(x0, weightless, far_wall, 1.25e-6, t)
    e1 = np.abs(_roll(x0, weightless, far_wall, 1e-5, t) - ref).max()
    e2 = np.abs(_roll(x0, weightless, far_wall, 5e-6, t) - ref).max()
    # Richardson reference is itself a little off, so allow a band around 16
    assert 13 < e1 / e2 < 19


def test_state_derivative_validates(consts):
    with pytest.raises(ValueError):
        state_derivative(np.zeros(5), np.zeros(3), consts)
    with pytest.raises(ValueError):
        state_derivative(np.zeros(6), np.zeros(2), consts)
