"""Nonlinear assumed-modes plant of the one-link flexible arm.

Generalized coordinates are ``p = [theta, q_1, ..., q_n]`` and the state is
interleaved as ``x = [theta, theta_dot, q_1, q_1_dot, ..., q_n, q_n_dot]``.

The equations come from Euler-Lagrange on

    K = 1/2 Ib th'^2 + 1/2 rho A int |P'(x)|^2 dx
    V = rho A g (l^2/2 sin th + cos th int w dx) + 1/2 EI int (w'')^2 dx

which, with orthogonal modes, gives the structured form

    M(p) p'' + C(p, p') p' + g(p) + eta(p) = u

    M = [[Ib + rho A l^3/3 + sum b0_j q_j^2, b2^T],
         [b2,                                diag(b0)]]
    g = [b4 g cos th - g sin th sum b5_j q_j,  b5 g cos th]
    eta = [0, b6 q]

``C`` is built from Christoffel symbols, so ``dM/dt - 2C`` is skew.

The numeric kernels take a packed coefficient vector (see
:func:`pack_coefficients`) and are compiled with numba; the functions
without a leading underscore are the user-facing wrappers.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from ._validation import check_vector

# packed coefficient layout: [hub, b4, g, length, b0.., b2.., b5.., b6.., tip..]
_HEAD = 4


def pack_coefficients(consts):
    """Flatten :class:`~flexlink.beam.ModalConstants` for the compiled kernels."""
    if isinstance(consts, np.ndarray):
        return consts
    return np.concatenate(
        [
            [consts.hub_inertia, consts.b4, consts.gravity, consts.length],
            consts.b0,
            consts.b2,
            consts.b5,
            consts.b6,
            consts.tip_values,
        ]
    ).astype(np.float64)


@njit(cache=True)
def _n_modes(coef):
    return (coef.shape[0] - _HEAD) // 5


@njit(cache=True)
def _unpack(coef):
    n = _n_modes(coef)
    h = _HEAD
    return (
        coef[0],
        coef[1],
        coef[2],
        coef[3],
        coef[h : h + n],
        coef[h + n : h + 2 * n],
        coef[h + 2 * n : h + 3 * n],
        coef[h + 3 * n : h + 4 * n],
        coef[h + 4 * n : h + 5 * n],
    )


@njit(cache=True)
def _mass(q, coef):
    hub, _, _, _, b0, b2, _, _, _ = _unpack(coef)
    n = q.shape[0]
    m = np.zeros((n + 1, n + 1))
    m00 = hub
    for j in range(n):
        m00 += b0[j] * q[j] * q[j]
        m[0, j + 1] = b2[j]
        m[j + 1, 0] = b2[j]
        m[j + 1, j + 1] = b0[j]
    m[0, 0] = m00
    return m


@njit(cache=True)
def _coriolis(q, theta_dot, q_dot, coef):
    b0 = _unpack(coef)[4]
    n = q.shape[0]
    c = np.zeros((n + 1, n + 1))
    for j in range(n):
        c[0, 0] += b0[j] * q[j] * q_dot[j]
        c[0, j + 1] = b0[j] * q[j] * theta_dot
        c[j + 1, 0] = -b0[j] * q[j] * theta_dot
    return c


@njit(cache=True)
def _gravity(theta, q, coef):
    _, b4, g, _, _, _, b5, _, _ = _unpack(coef)
    n = q.shape[0]
    out = np.empty(n + 1)
    ct, st = np.cos(theta), np.sin(theta)
    s = 0.0
    for j in range(n):
        s += b5[j] * q[j]
        out[j + 1] = b5[j] * g * ct
    out[0] = b4 * g * ct - g * st * s
    return out


@njit(cache=True)
def _elastic(q, coef):
    b6 = _unpack(coef)[7]
    n = q.shape[0]
    out = np.zeros(n + 1)
    for j in range(n):
        out[j + 1] = b6[j] * q[j]
    return out


@njit(cache=True)
def _bias(x, coef):
    """``C p' + g + eta`` at state ``x``."""
    theta, theta_dot = x[0], x[1]
    q = x[2::2].copy()
    q_dot = x[3::2].copy()
    pd = x[1::2].copy()
    return _coriolis(q, theta_dot, q_dot, coef) @ pd + _gravity(theta, q, coef) + _elastic(q, coef)


@njit(cache=True)
def _accelerations(x, u, coef):
    """Solve ``M p'' = u - C p' - g - eta`` exploiting the arrow structure of M.

    Returns NaNs if the Schur complement of the modal block is not positive.
    """
    hub, _, _, _, b0, b2, _, _, _ = _unpack(coef)
    n = b0.shape[0]
    r = u - _bias(x, coef)
    schur = hub
    num = r[0]
    for j in range(n):
        qj = x[2 + 2 * j]
        schur += b0[j] * qj * qj - b2[j] * b2[j] / b0[j]
        num -= b2[j] * r[j + 1] / b0[j]
    acc = np.empty(n + 1)
    if not schur > 0.0:
        acc[:] = np.nan
        return acc
    acc[0] = num / schur
    for j in range(n):
        acc[j + 1] = (r[j + 1] - b2[j] * acc[0]) / b0[j]
    return acc


@njit(cache=True)
def _derivative(x, u, coef):
    acc = _accelerations(x, u, coef)
    dx = np.empty_like(x)
    dx[0::2] = x[1::2]
    dx[1::2] = acc
    return dx


@njit(cache=True)
def _energy(x, coef):
    _, b4, g, _, _, _, b5, b6, _ = _unpack(coef)
    q = x[2::2].copy()
    pd = x[1::2].copy()
    kin = 0.5 * pd @ (_mass(q, coef) @ pd)
    pot = b4 * g * np.sin(x[0]) + g * np.cos(x[0]) * (b5 @ q) + 0.5 * (b6 @ (q * q))
    return kin, pot


@dataclass(frozen=True)
class DynamicsMatrices:
    """``M``, ``C``, ``g`` and ``eta`` evaluated at one state."""

    M: np.ndarray
    C: np.ndarray
    g: np.ndarray
    eta: np.ndarray

    def accelerations(self, state, u):
        """Generalized accelerations from a dense solve of the structured form."""
        pd = np.asarray(state, dtype=float)[1::2]
        return np.linalg.solve(self.M, np.asarray(u, dtype=float) - self.C @ pd - self.g - self.eta)


def state_size(n_modes):
    return 2 + 2 * n_modes


def coordinates(state):
    """Split an interleaved state into ``(p, p_dot)``."""
    x = np.asarray(state, dtype=float)
    return x[0::2].copy(), x[1::2].copy()


def make_state(theta=0.0, theta_dot=0.0, q=(), q_dot=None):
    q = np.asarray(q, dtype=float)
    q_dot = np.zeros_like(q) if q_dot is None else np.asarray(q_dot, dtype=float)
    x = np.empty(2 + 2 * q.size)
    x[0], x[1] = theta, theta_dot
    x[2::2], x[3::2] = q, q_dot
    return x


def _check_state(state, coef):
    coef = pack_coefficients(coef)
    return check_vector(state, state_size(int(_n_modes(coef))), "state")


def dynamics_matrices(state, coef):
    """Structured plant matrices at ``state``.

    Parameters
    ----------
    state : array_like of shape (2 + 2n,)
    coef : ModalConstants or ndarray
        Plant constants, or their packed form from :func:`pack_coefficients`.
    """
    coef = pack_coefficients(coef)
    x = _check_state(state, coef)
    q, q_dot = x[2::2].copy(), x[3::2].copy()
    return DynamicsMatrices(
        M=_mass(q, coef),
        C=_coriolis(q, x[1], q_dot, coef),
        g=_gravity(x[0], q, coef),
        eta=_elastic(q, coef),
    )


def state_derivative(state, u, coef):
    """``x_dot`` for generalized input ``u`` (torque in the theta channel)."""
    coef = pack_coefficients(coef)
    x = _check_state(state, coef)
    u = check_vector(u, x.size // 2, "u")
    dx = _derivative(x, u, coef)
    if not np.all(np.isfinite(dx)):
        raise np.linalg.LinAlgError("inertia matrix is not positive definite at this state")
    return dx


def total_energy(state, coef):
    """Kinetic and potential energy ``(K, V)`` in joules."""
    coef = pack_coefficients(coef)
    x = _check_state(state, coef)
    kin, pot = _energy(x, coef)
    return float(kin), float(pot)
