"""Post-run property checks on logged time series.

Each check takes plain arrays so it can be fed from an in-memory
:class:`~flexlink.simulation.SimLog` or from CSV files alike, and returns a
:class:`CheckResult`.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import pack_coefficients
from .kinematics import _jacobian


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.value:.6g} (limit {self.limit:.6g}) {self.detail}".rstrip()


def tail_mask(t, fraction=0.1):
    t = np.asarray(t)
    return t >= t[-1] - fraction * (t[-1] - t[0])


def lyapunov_monotone(t, v, engaged, rel_tol=1e-6):
    """``V >= 0`` and non-increasing (up to ``rel_tol * V(0)``) before contact."""
    v = np.asarray(v)
    free = ~np.asarray(engaged, bool)
    vf = v[free]
    if vf.size < 2:
        return CheckResult("lyapunov_monotone", False, float("nan"), 0.0, "no free-space samples")
    tol = rel_tol * abs(vf[0])
    rise = float(np.diff(vf).max())
    ok = rise <= tol and vf.min() >= 0.0
    return CheckResult("lyapunov_monotone", bool(ok), rise, tol, f"min V {vf.min():.3g} over {vf.size} samples")


def force_steady(t, fnorm, fd, rel_tol=0.02, abs_tol=1e-3):
    """Final 10 %: ``max | ||fc|| - fd |`` within ``rel_tol * fd`` (``abs_tol`` when fd = 0)."""
    tail = tail_mask(t)
    err = float(np.abs(np.asarray(fnorm)[tail] - fd).max())
    lim = rel_tol * fd if fd > 0 else abs_tol
    return CheckResult("force_steady", err <= lim, err, lim, f"mean {np.asarray(fnorm)[tail].mean():.6g} N")


def penetration_law(t, px, py, point, normal, kn, fd, rel_tol=0.02, abs_tol=1e-4):
    """Final 10 %: mean penetration matches ``fd / kn``."""
    tail = tail_mask(t)
    gap = (np.asarray(px)[tail] - point[0]) * normal[0] + (np.asarray(py)[tail] - point[1]) * normal[1]
    delta = float(np.maximum(0.0, -gap).mean())
    expected = fd / kn
    lim = rel_tol * expected if fd > 0 else abs_tol
    err = abs(delta - expected)
    return CheckResult("penetration_law", err <= lim, err, lim, f"penetration {delta:.6g} m vs {expected:.6g} m")


def tip_velocity_series(states, consts):
    """``P_dot = J(p) p_dot`` for each row of an interleaved state array."""
    coef = pack_coefficients(consts)
    out = np.empty((len(states), 2))
    for i, x in enumerate(np.asarray(states, float)):
        out[i] = _jacobian(x[0], np.ascontiguousarray(x[2::2]), coef) @ x[1::2]
    return out


def force_bound(t, force, fd_vec, pd_dot, p_dot, env, kf, window=0.2, atol=1e-6):
    """Outer-loop bound ``lim sup ||df|| <= S / kf``.

    In contact ``d(df)/dt = -kf df + Ke (P_dot - Pd_dot)``, so on a window
    starting at ``t0``

        ||df(t)|| <= exp(-kf (t - t0)) ||df(t0)|| + S / kf,
        S = sup ||Ke (P_dot - Pd_dot)||

    with ``Ke`` reduced to its normal part on a frictionless surface.  S is
    measured over the last ``window`` of the run and the bound is checked
    over the final 10 %.  ``atol`` [N] absorbs discretization noise.
    """
    t = np.asarray(t)
    df = np.asarray(force) - np.asarray(fd_vec)
    ev = np.asarray(p_dot) - np.asarray(pd_dot)
    if env.frictionless:
        n = env.normal
        kev = env.normal_stiffness * (ev @ n)[:, None] * n[None, :]
    else:
        kev = ev @ env.stiffness.T
    win = tail_mask(t, window)
    s = float(np.linalg.norm(kev[win], axis=1).max())
    t0 = t[win][0]
    tail = tail_mask(t)
    transient = np.exp(-kf * (t[tail] - t0)) * np.linalg.norm(df[win][0])
    err = np.linalg.norm(df[tail], axis=1)
    margin = err - (transient + s / kf)
    worst = int(np.argmax(margin))
    ok = margin[worst] <= atol
    return CheckResult(
        "force_bound",
        bool(ok),
        float(err.max()),
        float(s / kf + transient[worst]),
        f"S = {s:.3g} N/s, kf = {kf:g} 1/s",
    )


def run_checks(log, config, consts):
    """All post-run checks for one in-memory log."""
    engaged = log["engaged"] > 0.5
    out = [
        lyapunov_monotone(log.t, log["V"], engaged),
        force_steady(log.t, log["fnorm"], config.fd),
        penetration_law(
            log.t, log["px"], log["py"], config.env.point, config.env.normal, config.env.normal_stiffness, config.fd
        ),
    ]
    if engaged.any():
        force = np.column_stack([log["fcx"], log["fcy"]])
        pd_dot = np.column_stack([log["pd_dot_x"], log["pd_dot_y"]])
        p_dot = tip_velocity_series(log.states, consts)
        out.append(force_bound(log.t, force, config.desired_force, pd_dot, p_dot, config.env, config.kf))
    return out
