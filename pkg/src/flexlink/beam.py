"""Clamped-free Euler-Bernoulli modal basis.

Mode shapes are taken in the classical form

    phi(x) = cosh(bx) - cos(bx) - sigma * (sinh(bx) - sin(bx))

with ``b = beta_l / l`` and ``sigma = (cosh(beta_l) + cos(beta_l)) /
(sinh(beta_l) + sin(beta_l))``, scaled so that ``int_0^l phi^2 dx = l``.
Under that convention the tip value is ``|phi(l)| = 2`` for every mode.

The integrals over the shapes (``a0..a3``) and the lumped constants
(``b0..b8``) that the equations of motion consume are collected in
:class:`ModalConstants`.  :class:`ModalBasis` wraps the whole computation in
an estimator so that it can be configured, cloned and fitted like any other
scikit-learn component.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DomainError, check_positive, check_positive_int

logger = logging.getLogger(__name__)

DEFAULT_PANELS = 4096
PANELS_ENV_VAR = "FLEXLINK_QUAD_PANELS"


class RootBracketError(RuntimeError):
    """The characteristic equation has no sign change on a bracket."""

    def __init__(self, lo, hi):
        super().__init__(f"no sign change of cos(x)cosh(x)+1 on [{lo:.6g}, {hi:.6g}]")
        self.interval = (lo, hi)


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class BeamParams:
    """Physical description of a uniform link.

    Attributes
    ----------
    length : float
        Link length ``l`` [m].
    area : float
        Cross-section area ``A`` [m^2].
    density : float
        Mass density ``rho`` [kg/m^3].
    flexural_rigidity : float
        ``EI`` [N m^2].  Independent of ``area`` on purpose, so literal
        published values can be used even when they disagree with the
        geometry.
    joint_inertia : float
        Hub inertia ``Ib`` [kg m^2].
    gravity : float
        Magnitude of gravity along ``-y`` [m/s^2].
    n_modes : int
        Number of retained modes.
    """

    length: float
    area: float
    density: float
    flexural_rigidity: float
    joint_inertia: float = 0.0
    gravity: float = 9.81
    n_modes: int = 2

    def __post_init__(self):
        check_positive(self.length, "length")
        check_positive(self.area, "area")
        check_positive(self.density, "density")
        check_positive(self.flexural_rigidity, "flexural_rigidity")
        check_positive(self.joint_inertia, "joint_inertia", allow_zero=True)
        check_positive(self.gravity, "gravity", allow_zero=True)
        check_positive_int(self.n_modes, "n_modes")

    @property
    def linear_density(self):
        return self.density * self.area

    @classmethod
    def circular(cls, diameter, youngs_modulus=70e9, **kwargs):
        """Beam with a solid circular section; ``A`` and ``EI`` from ``diameter``.

        An explicit ``flexural_rigidity`` keyword still wins over the
        value derived from ``youngs_modulus``.
        """
        check_positive(diameter, "diameter")
        area = math.pi * diameter**2 / 4.0
        kwargs.setdefault("flexural_rigidity", youngs_modulus * math.pi * diameter**4 / 64.0)
        return cls(area=area, **kwargs)


@dataclass(frozen=True)
class ModeShape:
    """One clamped-free mode on a link of the given length."""

    index: int
    beta_l: float
    length: float
    sigma: float = field(init=False)
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "sigma", _sigma(self.beta_l))

    @property
    def beta(self):
        return self.beta_l / self.length

    def __call__(self, x, order=0):
        return mode_shape_eval(self, x, order)


@dataclass(frozen=True)
class ModalConstants:
    """Per-mode integrals and the lumped coefficients of the plant.

    ``b*`` arrays are indexed by mode; ``b4``, ``b8`` and ``link_inertia``
    are shared.  ``link_inertia`` is the rigid rotational inertia of the
    link about the joint, ``rho A l^3 / 3``.
    """

    a0: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    b0: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    b5: np.ndarray
    b6: np.ndarray
    b7: np.ndarray
    b4: float
    b8: float
    link_inertia: float
    gravity: float
    length: float
    tip_values: np.ndarray

    @property
    def n_modes(self):
        return len(self.b0)

    @property
    def natural_frequencies(self):
        """Clamped-hub modal frequencies ``sqrt(b6/b0)`` [rad/s]."""
        return np.sqrt(self.b6 / self.b0)

    @property
    def hub_inertia(self):
        """Joint inertia with the link frozen: ``Ib + rho A l^3/3``."""
        return self.b8 + self.link_inertia


def _char_scaled(x):
    # cos(x)cosh(x) + 1 divided by cosh(x); same roots, O(1) slope.
    return math.cos(x) + 1.0 / math.cosh(x)


def _char_scaled_prime(x):
    return -math.sin(x) - math.tanh(x) / math.cosh(x)


def solve_characteristic_roots(n_modes, tol=1e-13, max_iter=200):
    """Roots of ``cos(x) cosh(x) + 1 = 0`` in increasing order.

    Root ``j`` is bracketed on ``[(j-1) pi, j pi]`` and located with Newton
    steps that fall back to bisection whenever they would leave the
    current bracket.
    """
    check_positive_int(n_modes, "n_modes")
    check_positive(tol, "tol")
    roots = []
    for j in range(1, n_modes + 1):
        lo, hi = (j - 1) * math.pi, j * math.pi
        flo, fhi = _char_scaled(lo), _char_scaled(hi)
        if flo * fhi > 0:
            raise RootBracketError(lo, hi)
        x = 0.5 * (lo + hi)
        for _ in range(max_iter):
            fx = _char_scaled(x)
            if fx == 0.0:
                break
            if (fx > 0) == (flo > 0):
                lo, flo = x, fx
            else:
                hi = x
            dfx = _char_scaled_prime(x)
            step = fx / dfx if dfx != 0.0 else math.inf
            x_new = x - step
            if not lo < x_new < hi:
                x_new = 0.5 * (lo + hi)
            if abs(x_new - x) <= tol * max(1.0, abs(x)):
                x = x_new
                break
            x = x_new
        else:
            raise RootBracketError(lo, hi)
        roots.append(x)
    return roots


def _sigma(beta_l):
    return (math.cosh(beta_l) + math.cos(beta_l)) / (math.sinh(beta_l) + math.sin(beta_l))


def _one_minus_sigma(beta_l):
    # cancellation-free form of 1 - sigma
    num = -math.exp(-beta_l) + math.sin(beta_l) - math.cos(beta_l)
    return num / (math.sinh(beta_l) + math.sin(beta_l))


def _raw_shape(beta_l, z, order):
    """Unscaled shape and derivatives w.r.t. the dimensionless ``z = x/l``.

    The hyperbolic pair is written as ``((1-s) e^u + (1+s) e^-u) / 2`` so
    large arguments do not cancel.
    """
    s = _sigma(beta_l)
    oms = _one_minus_sigma(beta_l)
    u = beta_l * np.asarray(z, dtype=float)
    ep, em = np.exp(u), np.exp(-u)
    c, sn = np.cos(u), np.sin(u)
    # d^k/du^k of [cosh u - s sinh u] and of [-cos u + s sin u]
    if order == 0:
        hyp = 0.5 * (oms * ep + (1.0 + s) * em)
        trig = -c + s * sn
    elif order == 1:
        hyp = 0.5 * (oms * ep - (1.0 + s) * em)
        trig = sn + s * c
    elif order == 2:
        hyp = 0.5 * (oms * ep + (1.0 + s) * em)
        trig = c - s * sn
    elif order == 3:
        hyp = 0.5 * (oms * ep - (1.0 + s) * em)
        trig = -sn - s * c
    else:
        raise ValueError(f"derivative order must be 0..3, got {order}")
    return hyp + trig


def mode_shape_eval(mode, x, order=0):
    """Evaluate ``d^order phi / dx^order`` at positions ``x`` (m).

    Raises :class:`DomainError` when any position lies outside ``[0, l]``.
    """
    xa = np.asarray(x, dtype=float)
    l = mode.length
    if np.any(xa < 0.0) or np.any(xa > l) or not np.all(np.isfinite(xa)):
        raise DomainError(f"positions must lie in [0, {l}]")
    val = mode.scale * mode.beta**order * _raw_shape(mode.beta_l, xa / l, order)
    return float(val) if np.ndim(val) == 0 else val


def quadrature_panels():
    raw = os.environ.get(PANELS_ENV_VAR)
    if raw is None:
        return DEFAULT_PANELS
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{PANELS_ENV_VAR} must be an integer, got {raw!r}") from None
    check_positive_int(n, PANELS_ENV_VAR)
    return n


def _simpson(f, l, panels):
    panels += panels % 2
    x = np.linspace(0.0, l, panels + 1)
    return simpson(f(x), x=x)


def _integrate(f, l, panels, atol):
    fine = _simpson(f, l, panels)
    coarse = _simpson(f, l, max(2, panels // 2))
    err = abs(fine - coarse) / 15.0
    if not np.isfinite(fine) or err > atol:
        raise QuadratureError(f"quadrature did not converge: estimate {err:.3e} > atol {atol:.3e}")
    return fine


def build_modes(length, roots, panels=DEFAULT_PANELS):
    """Mode shapes for ``roots``, scaled so that ``int phi^2 = length``."""
    modes = []
    for j, r in enumerate(roots, start=1):
        raw = ModeShape(j, r, length)
        norm = _simpson(lambda x: raw(x) ** 2, length, panels)
        modes.append(ModeShape(j, r, length, scale=math.sqrt(length / norm)))
    return modes


def compute_modal_constants(beam, roots, panels=None, atol=1e-8, modes=None):
    """Modal integrals ``a0..a3`` and lumped constants ``b0..b8``.

    Parameters
    ----------
    beam : BeamParams
    roots : sequence of float
        Characteristic roots ``beta_j l``; must have ``beam.n_modes`` entries.
    panels : int, optional
        Simpson panels; defaults to ``FLEXLINK_QUAD_PANELS`` or 4096.
    atol : float
        Absolute tolerance on the Richardson error estimate of every integral.
    """
    if len(roots) != beam.n_modes:
        raise ValueError(f"expected {beam.n_modes} roots, got {len(roots)}")
    panels = quadrature_panels() if panels is None else panels
    check_positive_int(panels, "panels")
    l = beam.length
    if modes is None:
        modes = build_modes(l, roots, panels)

    a = np.empty((4, len(modes)))
    for j, m in enumerate(modes):
        a[0, j] = _integrate(lambda x: m(x) ** 2, l, panels, atol * l)
        a[1, j] = _integrate(lambda x: m(x) * x, l, panels, atol * l**2)
        a[2, j] = _integrate(lambda x: m(x), l, panels, atol * l)
        a[3, j] = _integrate(lambda x: m(x, 2) ** 2, l, panels, atol * max(1.0, m.beta**4 * l))
    a0, a1, a2, a3 = a
    rho_a = beam.linear_density
    consts = ModalConstants(
        a0=a0,
        a1=a1,
        a2=a2,
        a3=a3,
        b0=rho_a * a0,
        b1=rho_a * a1**2 / a0,
        b2=rho_a * a1,
        b3=a1 / a0,
        b5=rho_a * a2,
        b6=beam.flexural_rigidity * a3,
        b7=a2 / a0,
        b4=rho_a * l**2 / 2.0,
        b8=beam.joint_inertia,
        link_inertia=rho_a * l**3 / 3.0,
        gravity=beam.gravity,
        length=l,
        tip_values=np.array([m(l) for m in modes]),
    )
    for name in ("a0", "a1", "a2", "a3", "b0", "b6"):
        if not np.all(np.isfinite(getattr(consts, name))):
            raise QuadratureError(f"non-finite modal constant {name}")
    return consts


class ModalBasis(BaseEstimator):
    """Assumed-modes basis of a clamped-free link.

    ``fit`` takes a :class:`BeamParams`; ``transform`` maps positions along
    the link to the matrix of mode-shape values (one column per mode).
    Since the two take different inputs there is no ``fit_transform``.

    Parameters
    ----------
    derivative : int
        Derivative order returned by ``transform``.
    panels : int or None
        Simpson panels for the modal integrals.
    root_tol : float
        Relative tolerance of the characteristic-root solver.

    Attributes
    ----------
    roots_ : ndarray of shape (n_modes,)
    modes_ : list of ModeShape
    constants_ : ModalConstants
    beam_ : BeamParams
    """

    def __init__(self, derivative=0, panels=None, root_tol=1e-13):
        self.derivative = derivative
        self.panels = panels
        self.root_tol = root_tol

    def fit(self, X, y=None):
        if not isinstance(X, BeamParams):
            raise TypeError(f"ModalBasis.fit expects BeamParams, got {type(X).__name__}")
        panels = quadrature_panels() if self.panels is None else self.panels
        roots = solve_characteristic_roots(X.n_modes, self.root_tol)
        self.beam_ = X
        self.roots_ = np.asarray(roots)
        self.modes_ = build_modes(X.length, roots, panels)
        self.constants_ = compute_modal_constants(X, roots, panels, modes=self.modes_)
        logger.debug("modal frequencies %s rad/s", self.constants_.natural_frequencies)
        return self

    def transform(self, X):
        check_is_fitted(self, "modes_")
        x = np.asarray(X, dtype=float).reshape(-1)
        return np.column_stack([mode_shape_eval(m, x, self.derivative) for m in self.modes_])

    def deflection(self, x, q):
        """``w(x) = sum_j phi_j(x) q_j``."""
        check_is_fitted(self, "modes_")
        q = np.asarray(q, dtype=float)
        if q.shape != (len(self.modes_),):
            raise ValueError(f"expected {len(self.modes_)} modal coordinates, got shape {q.shape}")
        vals = np.stack([np.asarray(mode_shape_eval(m, x)) for m in self.modes_], axis=-1)
        out = vals @ q
        return float(out) if np.ndim(out) == 0 else out

    def golden_rows(self):
        """Rows ``(mode_index, beta_l, a0, a1, a2, a3)`` for the constants file."""
        check_is_fitted(self, "constants_")
        c = self.constants_
        return [
            (j + 1, float(self.roots_[j]), float(c.a0[j]), float(c.a1[j]), float(c.a2[j]), float(c.a3[j]))
            for j in range(c.n_modes)
        ]
