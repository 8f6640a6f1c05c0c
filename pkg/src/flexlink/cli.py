"""Command-line entry point.

    flexlink run SCENARIO --out DIR [--sweep] [--seed-constants]
    flexlink verify DIR

Exit codes: 0 success, 1 a verify check failed, 2 configuration or
input error, 3 divergence.
"""

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __name__ as _pkg
from ._validation import ConfigurationError, DivergenceError
from .beam import ModalBasis
from .checks import force_bound, force_steady, lyapunov_monotone, penetration_law, tip_velocity_series
from .config import ScenarioFile
from .simulation import LOOP_COLUMNS, log_columns, run_scenario, sweep

logger = logging.getLogger(_pkg)

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3
CONSTANT_COLUMNS = ["mode_index", "beta_l", "a0", "a1", "a2", "a3"]
SUMMARY_KEYS = [
    "name",
    "status",
    "contact",
    "contact_time",
    "force_mean",
    "force_error",
    "penetration_mean",
    "penetration_expected",
    "position_error",
    "tangential_offset",
    "tip_x",
    "tip_y",
    "settling_time",
    "deflection_max_tail",
    "deflection_max",
    "reference_clamped_steps",
    "log_file",
    "error",
]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return "" if v is None else str(v)


def _write_table(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_log(path, columns, data):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def write_constants(path, basis):
    _write_table(path, CONSTANT_COLUMNS, basis.golden_rows())


def _summary_row(summary, echo, status, log_file="", error=""):
    row = {k: summary.get(k, "") for k in SUMMARY_KEYS}
    row.update(status=status, log_file=log_file, error=error)
    row.update({f"config.{k}": v for k, v in echo.items()})
    return row


def cmd_run(args):
    scenario = ScenarioFile.from_path(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.sweep:
        jobs = scenario.sweep_grid()
    else:
        jobs = [({}, scenario.build())]

    basis = ModalBasis().fit(jobs[0][1].beam)
    write_constants(out / "constants.csv", basis)
    if args.seed_constants:
        print(f"wrote {out / 'constants.csv'}")
        return EXIT_OK

    rows, diverged = [], False
    if args.sweep:
        results = sweep([cfg for _, cfg in jobs], workers=scenario["sweep.workers"], keep_logs=True)
        samples = []
        for i, ((over, cfg), res) in enumerate(zip(jobs, results)):
            echo = dict(scenario.values, **over)
            if "error" in res:
                diverged = True
                rows.append(_summary_row({"name": cfg.name}, echo, "diverged", error=res["error"]))
                continue
            name = f"log_{i:03d}.csv"
            _write_log(out / name, res["log"].columns, res["log"].data)
            _write_log(out / f"loop_{i:03d}.csv", LOOP_COLUMNS, res["log"].loop)
            rows.append(_summary_row(res, echo, "ok", name))
            pen, force = res["samples"]
            samples += [(i, cfg.env.normal_stiffness, p, f) for p, f in zip(pen, force)]
        _write_table(out / "force_position.csv", ["run", "stiffness", "penetration", "fnorm"], samples)
    else:
        cfg = jobs[0][1]
        try:
            res = run_scenario(cfg)
        except DivergenceError as exc:
            rows.append(_summary_row({"name": cfg.name}, scenario.values, "diverged", error=str(exc)))
            diverged = True
            print(f"error: {exc}", file=sys.stderr)
        else:
            _write_log(out / "log.csv", res.log.columns, res.log.data)
            _write_log(out / "loop.csv", LOOP_COLUMNS, res.log.loop)
            rows.append(_summary_row(res.summary, scenario.values, "ok", "log.csv"))
            s = res.summary
            print(
                f"{cfg.name}: |fc| = {s['force_mean']:.6g} N, penetration = {s['penetration_mean']:.6g} m, "
                f"settled at t = {s['settling_time']:.4g} s"
            )
    header = list(rows[0])
    _write_table(out / "summary.csv", header, [[r[k] for k in header] for r in rows])
    print(f"wrote {len(rows)} summary row(s) to {out / 'summary.csv'}")
    return EXIT_DIVERGED if diverged else EXIT_OK


def _read_csv(path):
    if not path.is_file():
        raise FileNotFoundError(f"missing {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _read_array(path):
    if not path.is_file():
        raise FileNotFoundError(f"missing {path}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    return header, np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def verify_dir(out):
    """Re-run the property checks on every completed run in ``out``.

    Returns a list of ``(run_name, [CheckResult, ...])``.
    """
    out = Path(out)
    if not out.is_dir():
        raise FileNotFoundError(f"missing output directory {out}")
    rows = _read_csv(out / "summary.csv")
    _read_csv(out / "constants.csv")
    report = []
    for row in rows:
        if row["status"] != "ok":
            report.append((row["name"], []))
            continue
        echo = {k[len("config.") :]: v for k, v in row.items() if k.startswith("config.")}
        scenario = ScenarioFile.from_string(_echo_to_ini(echo), source=f"{out / 'summary.csv'}:{row['name']}")
        cfg = scenario.build()
        log_name = row["log_file"]
        columns, data = _read_array(out / log_name)
        if columns != log_columns(cfg.beam.n_modes):
            raise ConfigurationError(f"{log_name}: unexpected header")
        _, loop = _read_array(out / log_name.replace("log", "loop", 1))
        col = {c: data[:, i] for i, c in enumerate(columns)}
        lc = {c: loop[:, i] for i, c in enumerate(LOOP_COLUMNS)}
        t = col["t"]
        engaged = lc["engaged"] > 0.5
        env = cfg.env
        checks = [
            lyapunov_monotone(t, col["V"], engaged),
            force_steady(t, col["fnorm"], cfg.fd),
            penetration_law(t, col["px"], col["py"], env.point, env.normal, env.normal_stiffness, cfg.fd),
        ]
        if engaged.any():
            consts = ModalBasis().fit(cfg.beam).constants_
            states = data[:, 1 : 3 + 2 * cfg.beam.n_modes]
            checks.append(
                force_bound(
                    t,
                    np.column_stack([col["fcx"], col["fcy"]]),
                    cfg.desired_force,
                    np.column_stack([lc["pd_dot_x"], lc["pd_dot_y"]]),
                    tip_velocity_series(states, consts),
                    env,
                    cfg.kf,
                )
            )
        report.append((row["name"], checks))
    return report


def _echo_to_ini(echo):
    sections = {}
    for key, value in echo.items():
        section, name = key.split(".", 1)
        if value != "":
            sections.setdefault(section, []).append(f"{name} = {value}")
    return "\n".join(f"[{s}]\n" + "\n".join(lines) for s, lines in sections.items()) + "\n"


def cmd_verify(args):
    report = verify_dir(args.dir)
    ok = True
    for name, checks in report:
        if not checks:
            print(f"[FAIL] {name}: run did not complete")
            ok = False
        for c in checks:
            print(f"{name}: {c.line()}")
            ok &= c.passed
    print("all checks passed" if ok else "some checks failed")
    return EXIT_OK if ok else EXIT_CHECK


def build_parser():
    p = argparse.ArgumentParser(prog="flexlink", description="Flexible-link force control simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="simulate a scenario file")
    r.add_argument("config", help="scenario file (INI)")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--sweep", action="store_true", help="run the grid in the [sweep] section")
    r.add_argument("--seed-constants", action="store_true", help="only write constants.csv and exit")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("verify", help="re-check properties of a finished run")
    v.add_argument("dir")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
