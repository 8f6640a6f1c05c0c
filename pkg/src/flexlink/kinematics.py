"""Tip kinematics of the flexible link in the vertical plane.

A point at distance ``x`` along the undeformed link sits at

    P(x) = (x cos th - w(x) sin th,  x sin th + w(x) cos th)

and the flexible Jacobian is the analytic derivative of ``P(l)`` with
respect to ``p = [theta, q_1, ..., q_n]``.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from ._validation import DomainError
from .dynamics import _HEAD, _n_modes, pack_coefficients


@dataclass(frozen=True)
class PlanarPoint:
    x: float
    y: float

    def __array__(self, dtype=None, copy=None):
        return np.array([self.x, self.y], dtype=dtype)

    def __iter__(self):
        yield self.x
        yield self.y


@njit(cache=True)
def _tip_deflection(q, coef):
    n = _n_modes(coef)
    tip = coef[_HEAD + 4 * n : _HEAD + 5 * n]
    w = 0.0
    for j in range(n):
        w += tip[j] * q[j]
    return w


@njit(cache=True)
def _tip(theta, q, coef):
    l = coef[3]
    w = _tip_deflection(q, coef)
    c, s = np.cos(theta), np.sin(theta)
    return l * c - w * s, l * s + w * c


@njit(cache=True)
def _jacobian(theta, q, coef):
    n = _n_modes(coef)
    l = coef[3]
    tip = coef[_HEAD + 4 * n : _HEAD + 5 * n]
    w = _tip_deflection(q, coef)
    c, s = np.cos(theta), np.sin(theta)
    jac = np.empty((2, n + 1))
    jac[0, 0] = -l * s - w * c
    jac[1, 0] = l * c - w * s
    for j in range(n):
        jac[0, j + 1] = -tip[j] * s
        jac[1, j + 1] = tip[j] * c
    return jac


def _split(coords):
    p = np.asarray(coords, dtype=float)
    return float(p[0]), np.ascontiguousarray(p[1:])


def deflection(x, coords, basis):
    """Transverse deflection ``w(x)`` for generalized coordinates ``coords``.

    ``basis`` is a fitted :class:`~flexlink.beam.ModalBasis`.
    """
    _, q = _split(coords)
    xa = np.asarray(x, dtype=float)
    l = basis.beam_.length
    if np.any(xa < 0.0) or np.any(xa > l):
        raise DomainError(f"x must lie in [0, {l}]")
    return basis.deflection(xa, q)


def tip_position(coords, consts):
    """Tip position ``P(l)`` as a :class:`PlanarPoint`.

    ``consts`` is a :class:`~flexlink.beam.ModalConstants` (or packed array).
    """
    coef = pack_coefficients(consts)
    theta, q = _split(coords)
    return PlanarPoint(*_tip(theta, q, coef))


def jacobian(coords, consts):
    """``dP(l)/dp`` as a ``2 x (n+1)`` array, columns ``[theta, q_1, ...]``."""
    coef = pack_coefficients(consts)
    theta, q = _split(coords)
    return _jacobian(theta, q, coef)


def tip_velocity(state, consts):
    """``P_dot = J(p) p_dot`` for an interleaved plant state."""
    x = np.asarray(state, dtype=float)
    return jacobian(x[0::2], consts) @ x[1::2]
