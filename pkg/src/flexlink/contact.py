"""Compliant planar environment.

The surface is the line through ``point`` with outward unit ``normal``
(pointing from the material into free space).  The tip penetrates when
``delta = -(P - point) . normal > 0``.  While in contact the reaction is
either the anchored spring ``fc = Ke (P - point)`` or, for a frictionless
surface, its normal part only, ``fc = (n^T Ke n) delta (-n)``.

``fc`` is the force the tip applies *to* the environment; the plant sees
``tau_e = J^T fc`` subtracted from the actuator input.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._validation import ConfigurationError, check_spd


@dataclass(frozen=True)
class Environment:
    """Contact plane and stiffness.

    Parameters
    ----------
    point : (2,) array_like
        Contact point ``P0`` on the surface [m].
    normal : (2,) array_like
        Outward unit normal; normalized on construction.
    stiffness : float or (2, 2) array_like
        ``Ke`` [N/m]; a scalar is promoted to ``Ke * I``.
    unilateral : bool
        If False the spring acts on both sides of the surface.
    frictionless : bool
        Keep only the normal component of the spring force.
    """

    point: np.ndarray
    normal: np.ndarray
    stiffness: np.ndarray
    unilateral: bool = True
    frictionless: bool = False
    _packed: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p = np.asarray(self.point, dtype=float).reshape(-1)
        n = np.asarray(self.normal, dtype=float).reshape(-1)
        if p.shape != (2,) or not np.all(np.isfinite(p)):
            raise ConfigurationError(f"contact point must be a finite 2-vector, got {self.point!r}")
        norm = np.hypot(*n) if n.shape == (2,) else 0.0
        if not norm > 0 or not np.isfinite(norm):
            raise ConfigurationError(f"normal must be a nonzero 2-vector, got {self.normal!r}")
        k = check_spd(self.stiffness, "environment stiffness Ke", size=2)
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "normal", n / norm)
        object.__setattr__(self, "stiffness", k)
        object.__setattr__(
            self,
            "_packed",
            np.concatenate([p, n / norm, k.ravel(), [float(self.unilateral), float(self.frictionless)]]),
        )

    @property
    def normal_stiffness(self):
        """``n^T Ke n`` [N/m]."""
        return float(self.normal @ self.stiffness @ self.normal)

    def packed(self):
        return self._packed


@dataclass(frozen=True)
class ContactForce:
    force: np.ndarray
    in_contact: bool
    penetration: float

    @property
    def magnitude(self):
        return float(np.hypot(*self.force))


@njit(cache=True)
def _contact(px, py, env):
    dx, dy = px - env[0], py - env[1]
    nx, ny = env[2], env[3]
    gap = dx * nx + dy * ny
    delta = max(0.0, -gap)
    unilateral, frictionless = env[8] > 0.5, env[9] > 0.5
    active = delta > 0.0 or not unilateral
    if not active:
        return 0.0, 0.0, 0.0, False
    if frictionless:
        kn = nx * (env[4] * nx + env[5] * ny) + ny * (env[6] * nx + env[7] * ny)
        # signed so a bilateral surface also pulls back
        return kn * gap * nx, kn * gap * ny, delta, True
    return env[4] * dx + env[5] * dy, env[6] * dx + env[7] * dy, delta, True


def contact_force(position, env):
    """Force applied by a tip at ``position`` to ``env``."""
    px, py = (float(v) for v in np.asarray(position, dtype=float))
    fx, fy, delta, touching = _contact(px, py, env.packed())
    return ContactForce(np.array([fx, fy]), bool(touching), float(delta))


def reaction_torque(jac, fc):
    """Generalized reaction ``tau_e = J^T fc``; plant input is ``tau - tau_e``."""
    f = fc.force if isinstance(fc, ContactForce) else np.asarray(fc, dtype=float)
    return np.asarray(jac, dtype=float).T @ f
