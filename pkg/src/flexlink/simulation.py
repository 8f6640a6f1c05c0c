"""Closed-loop simulation: free-space tracking, then implicit force control.

The plant and the environment spring are integrated together with a
fixed-step RK4; the actuator torque is held constant over each step.
The outer force loop engages on the first sample with positive
penetration and stays engaged for the rest of the run.

Phase-1 reference is a quintic in ``theta`` from the initial angle to the
target direction over ``rise_time`` (``rise_time = 0`` gives a step), with
the quintic's acceleration fed forward.  After engagement the reference
comes from :func:`~flexlink.control.cartesian_to_joint_reference` applied
to ``target + P_d``.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from ._validation import ConfigurationError, DivergenceError, check_positive, check_positive_int, check_spd, check_vector
from .beam import BeamParams, ModalBasis
from .contact import Environment, _contact
from .control import TrackingController, _ik, _lyapunov, _tracking
from .dynamics import _derivative, _energy, pack_coefficients
from .kinematics import _jacobian, _tip, _tip_deflection

logger = logging.getLogger(__name__)


def log_columns(n_modes):
    state = ["theta", "theta_dot"]
    for j in range(1, n_modes + 1):
        state += [f"q1{j}", f"q1{j}_dot"]
    torque = ["u_theta"] + [f"u_q1{j}" for j in range(1, n_modes + 1)]
    return ["t", *state, "px", "py", "fcx", "fcy", "fnorm", *torque, "V", "Vdot", "w_tip", "K", "Vpot"]


LOOP_COLUMNS = [
    "t",
    "theta_d",
    "theta_dot_d",
    "offset_x",
    "offset_y",
    "pd_dot_x",
    "pd_dot_y",
    "penetration",
    "engaged",
]


@njit(cache=True)
def _plant_rhs(x, u, coef, env):
    q = x[2::2].copy()
    px, py = _tip(x[0], q, coef)
    fx, fy, _, _ = _contact(px, py, env)
    jac = _jacobian(x[0], q, coef)
    n = u.shape[0]
    tau = np.empty(n)
    for i in range(n):
        tau[i] = u[i] - (jac[0, i] * fx + jac[1, i] * fy)
    return _derivative(x, tau, coef)


@njit(cache=True)
def _rk4(x, u, coef, env, h):
    k1 = _plant_rhs(x, u, coef, env)
    k2 = _plant_rhs(x + 0.5 * h * k1, u, coef, env)
    k3 = _plant_rhs(x + 0.5 * h * k2, u, coef, env)
    k4 = _plant_rhs(x + h * k3, u, coef, env)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def _quintic(t, theta0, theta1, rise):
    d = theta1 - theta0
    if rise <= 0.0 or t >= rise:
        return theta1, 0.0, 0.0
    s = t / rise
    pos = theta0 + d * s**3 * (10.0 - 15.0 * s + 6.0 * s * s)
    vel = d * 30.0 * s * s * (1.0 - s) ** 2 / rise
    acc = d * 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (rise * rise)
    return pos, vel, acc


@njit(cache=True)
def _simulate(x0, coef, env, kp, kv, dl, theta_target, rise, target, fd, kmat, h, n_steps, dec, reach, force_loop):
    nx = x0.shape[0]
    nm = nx // 2 - 1
    ncol = 1 + nx + 5 + (nm + 1) + 5
    n_log = n_steps // dec + 1
    log = np.zeros((n_log, ncol))
    aux = np.zeros((n_log, 9))
    x = x0.copy()
    theta0 = x0[0]
    offset = np.zeros(2)
    engaged = False
    engaged_step = -1
    clamped_steps = 0
    pd = np.zeros(nm + 1)
    vd = np.zeros(nm + 1)
    ad = np.zeros(nm + 1)
    row = 0
    for k in range(n_steps + 1):
        t = k * h
        for i in range(nx):
            if not np.isfinite(x[i]):
                return log[:row], aux[:row], 1, t, engaged_step, clamped_steps
        q = x[2::2].copy()
        px, py = _tip(x[0], q, coef)
        fx, fy, delta, _ = _contact(px, py, env)
        if force_loop and not engaged and delta > 0.0:
            engaged = True
            engaged_step = k
        vel_ref = np.zeros(2)
        if engaged:
            dfx, dfy = fx - fd[0], fy - fd[1]
            vel_ref[0] = -(kmat[0, 0] * dfx + kmat[0, 1] * dfy)
            vel_ref[1] = -(kmat[1, 0] * dfx + kmat[1, 1] * dfy)
            theta_d, theta_dot_d, clamped = _ik(
                target[0] + offset[0], target[1] + offset[1], vel_ref[0], vel_ref[1], x, coef, reach
            )
            if clamped:
                clamped_steps += 1
            pd[0], vd[0], ad[0] = theta_d, theta_dot_d, 0.0
        else:
            pd[0], vd[0], ad[0] = _quintic(t, theta0, theta_target, rise)
        u = _tracking(x, pd, vd, ad, kp, kv, dl, coef)
        if k % dec == 0:
            val, rate = _lyapunov(x, pd, vd, kp, kv, dl, coef)
            kin, pot = _energy(x, coef)
            c = 0
            log[row, c] = t
            c += 1
            log[row, c : c + nx] = x
            c += nx
            log[row, c] = px
            log[row, c + 1] = py
            log[row, c + 2] = fx
            log[row, c + 3] = fy
            log[row, c + 4] = math.hypot(fx, fy)
            c += 5
            log[row, c : c + nm + 1] = u
            c += nm + 1
            log[row, c] = val
            log[row, c + 1] = rate
            log[row, c + 2] = _tip_deflection(q, coef)
            log[row, c + 3] = kin
            log[row, c + 4] = pot
            aux[row, 0] = t
            aux[row, 1] = pd[0]
            aux[row, 2] = vd[0]
            aux[row, 3] = offset[0]
            aux[row, 4] = offset[1]
            aux[row, 5] = vel_ref[0]
            aux[row, 6] = vel_ref[1]
            aux[row, 7] = delta
            aux[row, 8] = 1.0 if engaged else 0.0
            row += 1
        if k == n_steps:
            break
        if engaged:
            offset += h * vel_ref
        x = _rk4(x, u, coef, env, h)
    return log[:row], aux[:row], 0, n_steps * h, engaged_step, clamped_steps


def rk4_step(state, u, consts, env, h):
    """Advance the plant (with contact) by ``h`` holding ``u`` constant."""
    check_positive(h, "h")
    x = _rk4(np.asarray(state, float), np.asarray(u, float), pack_coefficients(consts), env.packed(), float(h))
    if not np.all(np.isfinite(x)):
        raise DivergenceError(float("nan"), x)
    return x


def static_deflection(theta, consts):
    """Modal coordinates of the link sagging under gravity with the joint held."""
    return -consts.b5 * consts.gravity * math.cos(theta) / consts.b6


@dataclass(frozen=True)
class SimConfig:
    """Everything that defines one closed-loop run.

    ``target`` is the Cartesian point the free-space phase steers the
    undeformed link towards; the force loop offsets it after contact.
    ``initial_modes`` is ``"static"`` (link sagging under gravity) or
    ``"zero"``, unless ``initial_state`` gives the full state explicitly.
    """

    beam: BeamParams
    env: Environment
    kp: tuple = (160.0, 100.0, 100.0)
    kv: tuple = (30.0, 1.0, 0.5)
    fd: float = 5.0
    kf: float = 10.0
    target: tuple = (0.7071, 0.7071)
    theta0: float = 0.0
    initial_modes: str = "static"
    initial_state: tuple = None
    step: float = 1e-5
    duration: float = 20.0
    rise_time: float = 2.0
    decimation: int = 100
    reach_margin: float = 0.05
    force_loop: bool = True
    name: str = "scenario"

    def __post_init__(self):
        check_positive(self.step, "step")
        check_positive(self.duration, "duration")
        if self.duration <= self.step:
            raise ConfigurationError("duration must exceed the step")
        check_positive(self.rise_time, "rise_time", allow_zero=True)
        check_positive(self.fd, "fd", allow_zero=True)
        check_positive(self.kf, "kf")
        check_positive_int(self.decimation, "decimation")
        check_vector(self.target, 2, "target")
        size = self.beam.n_modes + 1
        check_spd(self.kp, "Kp", size)
        check_spd(self.kv, "Kv", size)
        if self.initial_modes not in ("static", "zero"):
            raise ConfigurationError(f"initial_modes must be 'static' or 'zero', got {self.initial_modes!r}")

    @property
    def desired_force(self):
        """``fd`` along the inward surface normal."""
        return -self.fd * self.env.normal

    @property
    def n_steps(self):
        return int(round(self.duration / self.step))

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class SimLog:
    """Decimated time series of one run."""

    columns: list
    data: np.ndarray
    loop: np.ndarray
    loop_columns: list = field(default_factory=lambda: list(LOOP_COLUMNS))

    def __getitem__(self, name):
        if name in self.columns:
            return self.data[:, self.columns.index(name)]
        return self.loop[:, self.loop_columns.index(name)]

    def __len__(self):
        return self.data.shape[0]

    @property
    def t(self):
        return self["t"]

    @property
    def states(self):
        n = (len(self.columns) - 14) // 3
        i = self.columns.index("theta")
        return self.data[:, i : i + 2 + 2 * n]


@dataclass
class SimResult:
    config: SimConfig
    log: SimLog
    summary: dict
    basis: ModalBasis
    controller: TrackingController


def _prepare(config):
    basis = ModalBasis().fit(config.beam)
    consts = basis.constants_
    ctrl = TrackingController(kp=config.kp, kv=config.kv).fit(consts)
    n = config.beam.n_modes
    if config.initial_state is not None:
        x0 = check_vector(config.initial_state, 2 + 2 * n, "initial_state")
    else:
        x0 = np.zeros(2 + 2 * n)
        x0[0] = config.theta0
        if config.initial_modes == "static":
            x0[2::2] = static_deflection(config.theta0, consts)
    h_modal = 2 * math.pi / consts.natural_frequencies.max() / 20.0
    if config.step > h_modal:
        raise ConfigurationError(f"step {config.step:g} s does not resolve the fastest mode (need <= {h_modal:.3g} s)")
    h_loop = ctrl.stable_step(x0)
    if config.step >= h_loop:
        raise ConfigurationError(
            f"step {config.step:g} s is too long for the inner-loop gains: held-torque loop needs h < {h_loop:.3g} s"
        )
    return basis, ctrl, x0


def run_scenario(config, check_step=True):
    """Integrate one configuration; returns a :class:`SimResult`.

    Raises :class:`DivergenceError` if the state becomes non-finite.
    ``check_step=False`` skips the step-size preconditions (used to
    demonstrate what happens when they are violated).
    """
    try:
        basis, ctrl, x0 = _prepare(config)
    except ConfigurationError:
        if check_step:
            raise
        basis = ModalBasis().fit(config.beam)
        ctrl = TrackingController(kp=config.kp, kv=config.kv).fit(basis.constants_)
        x0 = np.zeros(2 + 2 * config.beam.n_modes)
        x0[0] = config.theta0
        if config.initial_modes == "static":
            x0[2::2] = static_deflection(config.theta0, basis.constants_)
    coef = pack_coefficients(basis.constants_)
    env = config.env
    theta_target = math.atan2(config.target[1], config.target[0])
    data, loop, status, t_end, engaged_step, clamped = _simulate(
        x0,
        coef,
        env.packed(),
        ctrl.kp_,
        ctrl.kv_,
        ctrl.delta_,
        theta_target,
        float(config.rise_time),
        np.asarray(config.target, float),
        config.desired_force,
        np.linalg.solve(env.stiffness, config.kf * np.eye(2)),
        float(config.step),
        config.n_steps,
        config.decimation,
        config.beam.length * (1.0 + config.reach_margin),
        config.force_loop,
    )
    if clamped:
        # only the angle of the offset target is used, so this is informational
        logger.info("%s: force reference beyond reach on %d steps", config.name, clamped)
    if status != 0:
        raise DivergenceError(t_end, data[-1, 1 : 3 + 2 * config.beam.n_modes] if len(data) else x0)
    log = SimLog(log_columns(config.beam.n_modes), data, loop)
    summary = summarize(log, config)
    summary["reference_clamped_steps"] = int(clamped)
    return SimResult(config, log, summary, basis, ctrl)


def summarize(log, config):
    """Steady-state figures over the final 10 % of the run.

    ``position_error`` is measured along the surface normal: the steady
    penetration minus ``fd / Ke``.  ``tangential_offset`` is where along the
    surface the tip came to rest, relative to ``P0``.
    """
    t = log.t
    tail = t >= t[-1] - 0.1 * config.duration
    fnorm = log["fnorm"]
    pen = log["penetration"]
    engaged = log["engaged"] > 0.5
    fd = config.fd
    out = {
        "name": config.name,
        "contact": bool(engaged.any()),
        "contact_time": float(t[engaged.argmax()]) if engaged.any() else float("nan"),
        "force_mean": float(fnorm[tail].mean()),
        "force_error": float(np.abs(fnorm[tail] - fd).max()),
        "penetration_mean": float(pen[tail].mean()),
        "penetration_expected": fd / config.env.normal_stiffness,
        "tip_x": float(log["px"][tail].mean()),
        "tip_y": float(log["py"][tail].mean()),
        "deflection_max_tail": float(np.abs(log["w_tip"][tail]).max()),
        "deflection_max": float(np.abs(log["w_tip"]).max()),
        "settling_time": _settling_time(t, fnorm, fd, engaged),
    }
    n = config.env.normal
    rel = np.array([out["tip_x"], out["tip_y"]]) - config.env.point
    out["position_error"] = abs(out["penetration_mean"] - out["penetration_expected"])
    out["tangential_offset"] = float(rel[0] * -n[1] + rel[1] * n[0])
    return out


def _settling_time(t, fnorm, fd, engaged, band=0.02):
    if not engaged.any():
        return float("nan")
    tol = band * max(fd, 1e-12)
    outside = np.abs(fnorm - fd) > tol
    if outside[-1]:
        return float("nan")
    idx = np.nonzero(outside)[0]
    return float(t[idx[-1] + 1]) if idx.size else float(t[0])


def sweep(configs, workers=1, keep_logs=False):
    """Run several configurations; failures are recorded, not raised.

    Returns a list of summary dicts in input order.  Each row also carries
    the force-position samples (penetration, ``fnorm``) of its run, and the
    full :class:`SimLog` under ``"log"`` when ``keep_logs`` is set.  A failed
    row is ``{"name": ..., "error": message}``.
    """
    if not configs:
        raise ValueError("sweep needs at least one configuration")

    def one(cfg):
        try:
            res = run_scenario(cfg)
        except (DivergenceError, ConfigurationError) as exc:
            logger.error("%s failed: %s", cfg.name, exc)
            return {"name": cfg.name, "error": str(exc)}
        row = dict(res.summary)
        row["samples"] = (res.log["penetration"].copy(), res.log["fnorm"].copy())
        if keep_logs:
            row["log"] = res.log
        return row

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(one, configs))
    return [one(c) for c in configs]
