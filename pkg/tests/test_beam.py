import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq
from sklearn.base import clone

from flexlink import BeamParams, DomainError, ModalBasis, solve_characteristic_roots
from flexlink.beam import PANELS_ENV_VAR, RootBracketError, compute_modal_constants, quadrature_panels

# 30-digit mpmath quadrature, frozen: (beta_l, a0, a1, a2, a3) on a unit-length link
GOLDEN = [
    (1.875104068711961, 1.0, 0.5688257437099107, 0.7829917560396257, 12.36236336832619),
    (4.694091132974175, 1.0, 0.09076678688638697, 0.4339358951107193, 485.518818513371),
]


def test_roots_against_bracketing_oracle():
    ours = solve_characteristic_roots(5)
    for j, r in enumerate(ours, start=1):
        ref = brentq(lambda x: math.cos(x) * math.cosh(x) + 1.0, (j - 1) * math.pi + 1e-9, j * math.pi, xtol=1e-15)
        assert r == pytest.approx(ref, rel=1e-12)


def test_roots_rounded():
    assert np.round(solve_characteristic_roots(2), 4).tolist() == [1.8751, 4.6941]


def test_higher_roots_approach_asymptote():
    r = solve_characteristic_roots(8)
    assert r[-1] == pytest.approx((2 * 8 - 1) * math.pi / 2, abs=1e-6)


def test_bad_bracket_reported():
    err = RootBracketError(0.0, 1.0)
    assert err.interval == (0.0, 1.0)


@pytest.mark.parametrize("j", [0, 1])
def test_modal_integrals_golden(basis, j):
    beta_l, *ints = GOLDEN[j]
    row = basis.golden_rows()[j]
    assert row[0] == j + 1
    assert row[1] == pytest.approx(beta_l, abs=1e-12)
    assert row[2:] == pytest.approx(ints, rel=1e-9)


def test_orthonormal(basis):
    x = np.linspace(0.0, 1.0, 20001)
    phi = basis.transform(x)
    gram = np.trapezoid(phi[:, :, None] * phi[:, None, :], x, axis=0)
    assert np.abs(gram - np.eye(2)).max() < 1e-6


def test_curvature_identity(basis):
    c = basis.constants_
    assert c.a3 == pytest.approx(basis.roots_**4 * c.a0, rel=1e-8)


def test_boundary_conditions(basis):
    for m in basis.modes_:
        assert abs(m(0.0)) < 1e-12 and abs(m(0.0, 1)) < 1e-12
        scale = m.beta**3
        assert abs(m(1.0, 2)) < 1e-9 * scale and abs(m(1.0, 3)) < 1e-9 * scale
    assert basis.constants_.tip_values == pytest.approx([2.0, -2.0], abs=1e-9)


def test_euler_bernoulli_frequencies(beam, consts):
    rho_a = beam.linear_density
    expected = np.array([b**2 for b, *_ in GOLDEN]) * math.sqrt(beam.flexural_rigidity / (rho_a * beam.length**4))
    assert consts.natural_frequencies == pytest.approx(expected, rel=1e-9)


def test_length_scaling():
    w = []
    for l in (0.8, 1.0, 1.2):
        b = BeamParams.circular(0.01, length=l, density=2700.0)
        w.append(ModalBasis().fit(b).constants_.natural_frequencies * l**2)
    assert w[0] == pytest.approx(w[1], rel=1e-9) and w[2] == pytest.approx(w[1], rel=1e-9)


def test_domain_error(basis):
    with pytest.raises(DomainError):
        basis.modes_[0](1.01)
    with pytest.raises(DomainError):
        basis.transform([-0.1])


def test_lumped_constants(beam, consts):
    rho_a = beam.linear_density
    assert consts.b0 == pytest.approx(rho_a * consts.a0)
    assert consts.b1 == pytest.approx(rho_a * consts.a1**2 / consts.a0)
    assert consts.b4 == pytest.approx(rho_a / 2)
    assert consts.b6 == pytest.approx(beam.flexural_rigidity * consts.a3)
    assert consts.link_inertia == pytest.approx(rho_a / 3)
    # the rigid-body inertia is the limit of sum b1 over all modes
    assert consts.b1.sum() < consts.link_inertia


def test_circular_section():
    b = BeamParams.circular(0.01, length=1.0, density=2700.0)
    assert b.flexural_rigidity == pytest.approx(34.3612, rel=1e-5)
    assert b.linear_density == pytest.approx(2700 * math.pi * 0.005**2)


@pytest.mark.parametrize("field", ["length", "area", "density", "flexural_rigidity"])
def test_beam_rejects_nonpositive(field):
    kw = dict(length=1.0, area=1e-4, density=2700.0, flexural_rigidity=30.0)
    kw[field] = 0.0
    with pytest.raises(ValueError):
        BeamParams(**kw)


def test_panel_env_override(monkeypatch, beam):
    monkeypatch.setenv(PANELS_ENV_VAR, "512")
    assert quadrature_panels() == 512
    coarse = ModalBasis().fit(beam).constants_
    assert coarse.a3 == pytest.approx([g[4] for g in GOLDEN], rel=1e-7)
    monkeypatch.setenv(PANELS_ENV_VAR, "zero")
    with pytest.raises(ValueError):
        quadrature_panels()


def test_estimator_protocol(beam):
    est = ModalBasis(derivative=2)
    assert est.get_params() == {"derivative": 2, "panels": None, "root_tol": 1e-13}
    twin = clone(est).fit(beam)
    curv = twin.transform(np.array([0.0, 0.5]))
    assert curv.shape == (2, 2)
    with pytest.raises(TypeError):
        ModalBasis().fit(np.zeros(3))


def test_root_count_mismatch(beam):
    with pytest.raises(ValueError):
        compute_modal_constants(beam, [1.875])


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(-0.1, 0.1))
def test_deflection_linear_in_q(basis, x, c):
    w1 = basis.deflection(x, np.array([c, 0.0]))
    assert w1 == pytest.approx(c * basis.modes_[0](x), abs=1e-15)
    assert basis.deflection(1.0, np.array([c, 0.0])) == pytest.approx(2 * c, abs=1e-12)
