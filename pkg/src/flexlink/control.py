"""Inner joint-space tracking law and outer implicit force loop.

Inner loop (PD with gravity and vibration compensation)::

    u = Kp e + Kv e' + M (p''_d + D e') + C (p'_d + D e) + g + eta
    e = p_d - p,   D = Kv^-1 Kp

With ``s = e' + D e`` the closed loop reduces to ``M s' = -(C + Kv) s``, and

    V  = 1/2 s^T M s + e^T Kp e
    V' = -e'^T Kv e' - e^T D^T Kv D e

Outer loop::

    df = fc - fd,   P'_d = -k df,   P_d = P_d + h P'_d,   k = Ke^-1 kf

The Cartesian offset ``P_d`` is added to the tracking target and mapped to
a joint reference through rigid-arm inverse kinematics; modal references
are zero so the loop also drives the link to its undeformed shape.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import ConfigurationError, check_positive, check_spd, check_vector
from .dynamics import DynamicsMatrices, _mass, _coriolis, _gravity, _elastic, pack_coefficients
from .kinematics import _jacobian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class JointReference:
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray

    @classmethod
    def hold(cls, position):
        p = np.asarray(position, dtype=float)
        return cls(p, np.zeros_like(p), np.zeros_like(p))


@njit(cache=True)
def _tracking(x, pd, vd, ad, kp, kv, dl, coef):
    p = x[0::2].copy()
    v = x[1::2].copy()
    q = p[1:].copy()
    e = pd - p
    ed = vd - v
    m = _mass(q, coef)
    c = _coriolis(q, x[1], v[1:].copy(), coef)
    return kp @ e + kv @ ed + m @ (ad + dl @ ed) + c @ (vd + dl @ e) + _gravity(x[0], q, coef) + _elastic(q, coef)


@njit(cache=True)
def _lyapunov(x, pd, vd, kp, kv, dl, coef):
    p = x[0::2].copy()
    e = pd - p
    ed = vd - x[1::2]
    s = ed + dl @ e
    m = _mass(p[1:].copy(), coef)
    de = dl @ e
    val = 0.5 * s @ (m @ s) + e @ (kp @ e)
    rate = -(ed @ (kv @ ed)) - de @ (kv @ de)
    return val, rate


def _dense(mats):
    return DynamicsMatrices(*(np.asarray(getattr(mats, k), dtype=float) for k in ("M", "C", "g", "eta")))


def tracking_control(state, ref, gains, dyn):
    """Control law evaluated with precomputed plant matrices ``dyn``.

    ``gains`` is a fitted :class:`TrackingController`.  Passing ``dyn``
    explicitly keeps the law usable with stub or identified models.
    """
    check_is_fitted(gains, "delta_")
    x = np.asarray(state, dtype=float)
    e = ref.position - x[0::2]
    ed = ref.velocity - x[1::2]
    d = _dense(dyn)
    dl = gains.delta_
    return (
        gains.kp_ @ e
        + gains.kv_ @ ed
        + d.M @ (ref.acceleration + dl @ ed)
        + d.C @ (ref.velocity + dl @ e)
        + d.g
        + d.eta
    )


def lyapunov_value(state, ref, gains, dyn):
    """``(V, V_dot)`` of the tracking error; see the module docstring."""
    check_is_fitted(gains, "delta_")
    x = np.asarray(state, dtype=float)
    e = ref.position - x[0::2]
    ed = ref.velocity - x[1::2]
    dl, kv = gains.delta_, gains.kv_
    s = ed + dl @ e
    val = 0.5 * s @ (np.asarray(dyn.M) @ s) + e @ (gains.kp_ @ e)
    de = dl @ e
    return float(val), float(-(ed @ kv @ ed) - de @ kv @ de)


class TrackingController(BaseEstimator):
    """PD tracking law with model compensation.

    Parameters
    ----------
    kp, kv : array_like
        Proportional and derivative gains; 1-D input is read as a diagonal.
        Both must be symmetric positive definite with ``Kv^-1 Kp``
        nonsingular, which is checked by :meth:`fit`.

    Attributes
    ----------
    kp_, kv_, delta_ : ndarray
    coef_ : ndarray
        Packed plant coefficients (see :func:`~flexlink.dynamics.pack_coefficients`).
    """

    def __init__(self, kp=(160.0, 100.0, 100.0), kv=(30.0, 1.0, 0.5)):
        self.kp = kp
        self.kv = kv

    def fit(self, X, y=None):
        """Validate gains against the plant constants ``X`` (ModalConstants)."""
        coef = pack_coefficients(X)
        size = (coef.shape[0] - 4) // 5 + 1
        self.kp_ = check_spd(self.kp, "Kp", size)
        self.kv_ = check_spd(self.kv, "Kv", size)
        delta = np.linalg.solve(self.kv_, self.kp_)
        if not np.isfinite(np.linalg.cond(delta)):
            raise ConfigurationError("Delta = Kv^-1 Kp is singular")
        if not np.allclose(self.kv_ @ delta, self.kp_, rtol=1e-10, atol=0.0):
            raise ConfigurationError("Kv Delta does not reproduce Kp")
        self.delta_ = delta
        self.coef_ = coef
        return self

    def torque(self, state, ref):
        check_is_fitted(self, "delta_")
        x = check_vector(state, 2 * self.kp_.shape[0], "state")
        return _tracking(
            x,
            np.asarray(ref.position, float),
            np.asarray(ref.velocity, float),
            np.asarray(ref.acceleration, float),
            self.kp_,
            self.kv_,
            self.delta_,
            self.coef_,
        )

    def lyapunov(self, state, ref):
        check_is_fitted(self, "delta_")
        x = check_vector(state, 2 * self.kp_.shape[0], "state")
        val, rate = _lyapunov(
            x, np.asarray(ref.position, float), np.asarray(ref.velocity, float), self.kp_, self.kv_, self.delta_, self.coef_
        )
        return float(val), float(rate)

    def predict(self, X, refs):
        """Torques for a batch of states, one reference per row."""
        return np.array([self.torque(x, r) for x, r in zip(np.atleast_2d(X), refs)])

    def stable_step(self, state=None):
        """Largest sampling period for which the held-torque loop is stable.

        The fastest closed-loop pole is the largest eigenvalue of
        ``M^-1 Kv``; a zero-order-hold loop needs ``h * lambda < 2``.
        """
        check_is_fitted(self, "delta_")
        n = self.kp_.shape[0] - 1
        q = np.zeros(n) if state is None else np.asarray(state, dtype=float)[2::2]
        lam = np.linalg.eigvals(np.linalg.solve(_mass(np.ascontiguousarray(q), self.coef_), self.kv_)).real.max()
        return 2.0 / lam


@dataclass
class ForceLoopState:
    """Integrator of the implicit force loop (owned by one simulation).

    ``desired`` is the planar force to apply to the environment, ``gain``
    the scalar ``kf`` [1/s] and ``stiffness`` the environment ``Ke``.
    """

    desired: np.ndarray
    gain: float
    stiffness: np.ndarray
    offset: np.ndarray = field(default_factory=lambda: np.zeros(2))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        self.desired = check_vector(self.desired, 2, "desired force")
        check_positive(self.gain, "kf")
        self.stiffness = check_spd(self.stiffness, "Ke", 2)
        self.offset = check_vector(self.offset, 2, "offset").copy()
        self.velocity = check_vector(self.velocity, 2, "velocity").copy()

    @property
    def k(self):
        """``Ke^-1 kf``."""
        return np.linalg.solve(self.stiffness, self.gain * np.eye(2))

    def error(self, fc):
        f = fc.force if hasattr(fc, "force") else np.asarray(fc, dtype=float)
        return f - self.desired


def force_outer_update(fc, loop, dt):
    """Advance the force integrator by ``dt``; returns ``(P'_d, P_d offset)``.

    The velocity reference uses the force error at the start of the step
    and the offset is integrated with one explicit Euler step.
    """
    check_positive(dt, "dt")
    loop.velocity = -loop.k @ loop.error(fc)
    loop.offset = loop.offset + dt * loop.velocity
    return loop.velocity.copy(), loop.offset.copy()


@njit(cache=True)
def _ik(px, py, vx, vy, x, coef, reach):
    """Rigid-arm inverse kinematics; returns theta_d, theta_dot_d, clamped."""
    r = np.hypot(px, py)
    clamped = r > reach
    theta_d = np.arctan2(py, px)
    q = x[2::2].copy()
    jac = _jacobian(x[0], q, coef)
    jx, jy = jac[0, 0], jac[1, 0]
    nrm = jx * jx + jy * jy
    theta_dot_d = (jx * vx + jy * vy) / nrm if nrm > 0.0 else 0.0
    return theta_d, theta_dot_d, clamped


def cartesian_to_joint_reference(p_ref, v_ref, state, consts, margin=0.05):
    """Joint reference that points the undeformed link at ``p_ref``.

    ``theta_d = atan2(y, x)``, ``theta_dot_d`` is ``v_ref`` projected on the
    pseudo-inverse of the theta column of the Jacobian, modal references
    and all accelerations are zero.  Targets beyond ``l (1 + margin)`` are
    clamped onto that circle with a warning (the angle is unaffected).
    """
    coef = pack_coefficients(consts)
    x = np.asarray(state, dtype=float)
    p = np.asarray(p_ref, dtype=float)
    v = np.asarray(v_ref, dtype=float)
    reach = coef[3] * (1.0 + margin)
    theta_d, theta_dot_d, clamped = _ik(p[0], p[1], v[0], v[1], x, coef, reach)
    if clamped:
        logger.warning("reference %s beyond reach %.4g m; clamped to the boundary", p, reach)
    n = x.size // 2
    pos = np.zeros(n)
    vel = np.zeros(n)
    pos[0], vel[0] = theta_d, theta_dot_d
    return JointReference(pos, vel, np.zeros(n))
