"""Scenario files: INI text with fixed sections, parsed into SimConfig objects.

Example::

    [beam]
    length = 1.0
    diameter = 0.01
    density = 2700
    flexural_rigidity = 34.3612   ; optional, overrides the value from diameter

    [environment]
    point = 0.7071, 0.7071
    normal = 0.7071, -0.7071
    stiffness = 86.9

    [sweep]
    stiffnesses = 20, 86.4, 200

Every key is optional except where noted in ``SCHEMA``; unknown sections or
keys are rejected with the offending line number.
"""

import configparser
import itertools
import math
from importlib import resources

from ._validation import ConfigurationError
from .beam import BeamParams
from .contact import Environment
from .simulation import SimConfig

_FLOAT, _INT, _BOOL, _VEC, _STR = "float", "int", "bool", "vector", "str"

# section -> key -> (type, default); default None means required
SCHEMA = {
    "beam": {
        "length": (_FLOAT, None),
        "diameter": (_FLOAT, None),
        "density": (_FLOAT, None),
        "youngs_modulus": (_FLOAT, 70e9),
        "flexural_rigidity": (_FLOAT, ""),
        "joint_inertia": (_FLOAT, 0.0),
        "gravity": (_FLOAT, 9.81),
        "n_modes": (_INT, 2),
    },
    "environment": {
        "point": (_VEC, None),
        "normal": (_VEC, None),
        "stiffness": (_VEC, None),
        "unilateral": (_BOOL, True),
        "frictionless": (_BOOL, True),
    },
    "gains": {
        "kp": (_VEC, "160, 100, 100"),
        "kv": (_VEC, "30, 1, 0.5"),
    },
    "force": {
        "fd": (_FLOAT, 5.0),
        "kf": (_FLOAT, 10.0),
        "enabled": (_BOOL, True),
    },
    "simulation": {
        "name": (_STR, "scenario"),
        "step": (_FLOAT, 1e-5),
        "duration": (_FLOAT, 20.0),
        "rise_time": (_FLOAT, 2.0),
        "theta0": (_FLOAT, 0.0),
        "initial_modes": (_STR, "static"),
        "target": (_VEC, "0.7071, 0.7071"),
        "decimation": (_INT, 100),
        "reach_margin": (_FLOAT, 0.05),
    },
    "sweep": {
        "lengths": (_VEC, ""),
        "diameters": (_VEC, ""),
        "stiffnesses": (_VEC, ""),
        "forces": (_VEC, ""),
        "workers": (_INT, 1),
    },
}


def _line_of(text, section, key=None):
    current = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return no
        elif key is not None and current == section and line.split("=", 1)[0].split(":", 1)[0].strip().lower() == key:
            return no
    return 0


def _convert(kind, raw, where):
    try:
        if kind == _FLOAT:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError("not finite")
            return value
        if kind == _INT:
            return int(raw)
        if kind == _BOOL:
            low = str(raw).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError("expected true/false")
        if kind == _VEC:
            return tuple(float(v) for v in str(raw).replace(";", ",").split(",") if v.strip())
        return str(raw).strip()
    except ValueError as exc:
        raise ConfigurationError(f"{where}: cannot read {raw!r} as {kind} ({exc})") from None


class ScenarioFile:
    """Parsed, type-checked content of one scenario file.

    ``values`` maps ``"section.key"`` to a typed value with defaults filled
    in; it is what gets echoed into run summaries.
    """

    def __init__(self, values, source="<string>"):
        self.values = values
        self.source = source

    @classmethod
    def from_string(cls, text, source="<string>"):
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigurationError(f"{source}: {exc}") from None
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigurationError(f"{source}:{_line_of(text, section)}: unknown section [{section}]")
            for key in parser[section]:
                if key not in SCHEMA[section]:
                    line = _line_of(text, section, key)
                    raise ConfigurationError(f"{source}:{line}: unknown key '{key}' in [{section}]")
        values = {}
        for section, keys in SCHEMA.items():
            for key, (kind, default) in keys.items():
                where = f"{source}:{_line_of(text, section, key)} [{section}] {key}"
                if parser.has_option(section, key):
                    raw = parser.get(section, key)
                elif default is None:
                    raise ConfigurationError(f"{source}: missing required key '{key}' in [{section}]")
                else:
                    raw = default
                values[f"{section}.{key}"] = None if raw == "" else _convert(kind, raw, where)
        return cls(values, source)

    @classmethod
    def from_path(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigurationError(f"cannot read scenario file: {exc}") from None
        return cls.from_string(text, source=str(path))

    def __getitem__(self, key):
        return self.values[key]

    def build(self, **override):
        """Single :class:`SimConfig`; ``override`` replaces ``section.key`` values."""
        v = dict(self.values)
        v.update(override)
        where = self.source
        try:
            beam = BeamParams.circular(
                v["beam.diameter"],
                youngs_modulus=v["beam.youngs_modulus"],
                length=v["beam.length"],
                density=v["beam.density"],
                joint_inertia=v["beam.joint_inertia"],
                gravity=v["beam.gravity"],
                n_modes=v["beam.n_modes"],
                **({} if v["beam.flexural_rigidity"] is None else {"flexural_rigidity": v["beam.flexural_rigidity"]}),
            )
            stiff = v["environment.stiffness"]
            if len(stiff) == 1:
                stiff = stiff[0]
            elif len(stiff) == 4:
                stiff = [stiff[:2], stiff[2:]]
            else:
                raise ConfigurationError("stiffness takes 1 or 4 numbers")
            env = Environment(
                v["environment.point"],
                v["environment.normal"],
                stiff,
                unilateral=v["environment.unilateral"],
                frictionless=v["environment.frictionless"],
            )
            return SimConfig(
                beam=beam,
                env=env,
                kp=v["gains.kp"],
                kv=v["gains.kv"],
                fd=v["force.fd"],
                kf=v["force.kf"],
                force_loop=v["force.enabled"],
                target=v["simulation.target"],
                theta0=v["simulation.theta0"],
                initial_modes=v["simulation.initial_modes"],
                step=v["simulation.step"],
                duration=v["simulation.duration"],
                rise_time=v["simulation.rise_time"],
                decimation=v["simulation.decimation"],
                reach_margin=v["simulation.reach_margin"],
                name=v["simulation.name"],
            )
        except ValueError as exc:
            raise ConfigurationError(f"{where}: {exc}") from None

    def sweep_grid(self):
        """Cartesian product over the non-empty sweep axes.

        Returns ``[(overrides, SimConfig), ...]``.  Sweeping diameters
        derives ``EI`` from the section, dropping any literal override.
        """
        axes = []
        for key, target in (
            ("sweep.lengths", "beam.length"),
            ("sweep.diameters", "beam.diameter"),
            ("sweep.stiffnesses", "environment.stiffness"),
            ("sweep.forces", "force.fd"),
        ):
            vals = self.values[key]
            if vals:
                axes.append([(target, x) for x in vals])
        if not axes:
            raise ConfigurationError(f"{self.source}: --sweep needs at least one axis in [sweep]")
        out = []
        for combo in itertools.product(*axes):
            over = dict(combo)
            if "beam.diameter" in over:
                over["beam.flexural_rigidity"] = None
            if "environment.stiffness" in over:
                over["environment.stiffness"] = (over["environment.stiffness"],)
            tag = "_".join(f"{k.split('.')[1]}={float(x if not isinstance(x, tuple) else x[0]):g}" for k, x in combo)
            over["simulation.name"] = f"{self.values['simulation.name']}[{tag}]"
            out.append((over, self.build(**over)))
        return out


def bundled_scenario_path(name="reference"):
    return resources.files("flexlink") / "scenarios" / f"{name}.ini"


def load_bundled(name="reference"):
    """:class:`ScenarioFile` for a scenario shipped with the package."""
    path = bundled_scenario_path(name)
    return ScenarioFile.from_string(path.read_text(encoding="utf-8"), source=str(path))
