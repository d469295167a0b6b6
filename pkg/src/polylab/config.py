"""Flat ``section.key = value`` run configuration.

Grammar (one assignment per line)::

    # comment, also allowed after a value
    section.key = value

Values are parsed in this order: ``true``/``false``, integer, float, a JSON
array (``[[3, 0], [0, 0.5]]``), a double-quoted JSON string, and otherwise the
bare text. Keys are validated against the schema of the chosen subcommand;
``energy.*`` accepts any parameter name, which is then checked by the
energy constructor.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

from .minimizer.solver import MinimizerConfig

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)+$")


class ConfigError(ValueError):
    pass


def parse_value(text: str):
    t = text.strip()
    if t in ("true", "false"):
        return t == "true"
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        pass
    if t.startswith("[") or t.startswith('"'):
        try:
            return json.loads(t)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed value {t!r}: {exc}") from None
    return t


def _strip_comment(line: str) -> str:
    quoted = False
    for i, ch in enumerate(line):
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            return line[:i]
    return line


def parse_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError(f"{source}:{lineno}: bad key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if value == "":
            raise ConfigError(f"{source}:{lineno}: empty value for {key!r}")
        out[key] = parse_value(value)
    return out


# key -> (type, default); "list" values stay as parsed JSON
_COMMON = {
    "run.seed": (int, 0),
    "run.out": (str, "out"),
    "run.workers": (int, 1),
}
_MESH = {
    "mesh.shape": (str, "unit-square"),
    "mesh.resolution": (int, 8),
    "mesh.file": (str, None),
    "mesh.radius": (float, None),
    "mesh.r_in": (float, None),
    "mesh.r_out": (float, None),
}
_BOUNDARY = {
    "boundary.kind": (str, "identity"),
    "boundary.matrix": (list, None),
    "boundary.offset": (list, None),
    "boundary.factor": (float, None),
    "boundary.angle": (float, None),
    "boundary.center": (list, None),
    "boundary.file": (str, None),
}
_BOUND = {
    "bound.M": (float, None),
    "bound.s": (float, 2.0),
    "bound.norm": (str, "operator"),
}
_MINIMIZER = {
    f"minimizer.{f.name}": (float if f.name == "beta" else type(f.default), f.default)
    for f in fields(MinimizerConfig) if f.name not in ("workers", "seed")
}
_CHECK = {"check.deformation": (str, None), "check.samples": (int, 8)}
_SCAN = {
    "scan.dim": (int, 3),
    "scan.trials": (int, 1000),
    "scan.alpha": (float, 1.0),
    "scan.r": (float, 2.0),
    "scan.g_const": (float, 0.0),
    "expect.polyconvexity": (str, None),
    "expect.convexity": (str, None),
    "expect.coercivity": (str, None),
    "expect.barrier": (str, None),
}
_SEMI = {
    "semicontinuity.family": (str, "oscillation"),
    "semicontinuity.ks": (list, [1, 2, 4, 8]),
    "semicontinuity.a": (list, None),
    "semicontinuity.b": (list, None),
    "semicontinuity.F0": (list, None),
    "semicontinuity.cells_per_k": (int, None),
    "semicontinuity.amplitude": (float, None),
    "semicontinuity.resolution": (int, None),
    "semicontinuity.minors": (bool, True),
    "expect.holds": (bool, True),
}
_PIOLA = {
    "piola.dim": (int, 2),
    "piola.maps": (list, ["quadratic", "bump"]),
    "piola.levels": (int, 4),
    "piola.base": (int, 8),
    "piola.sampling": (str, "centroid"),
    "piola.minor_ks": (list, [1, 2, 4, 8]),
    "piola.minor_tol": (float, 0.05),
    "expect.ratio_lo": (float, None),
    "expect.ratio_hi": (float, None),
}
_COV = {
    "cov.cases": (list, ["affine", "half_space", "fold", "grid_twist"]),
    "cov.deformation": (str, None),
    "cov.samples": (int, 4096),
    "cov.tol": (float, 1e-10),
}

SCHEMAS = {
    "minimize": {**_COMMON, **_MESH, **_BOUNDARY, **_BOUND, **_MINIMIZER},
    "check": {**_COMMON, **_MESH, **_BOUND, **_CHECK},
    "energy-scan": {**_COMMON, **_SCAN},
    "semicontinuity": {**_COMMON, **_SEMI},
    "piola": {**_COMMON, **_PIOLA},
    "cov": {**_COMMON, **_MESH, **_COV},
}
_ENERGY_DEFAULT = {"minimize": "w2", "check": "w2", "energy-scan": "w2", "semicontinuity": "w2"}


def _coerce(key: str, value, typ):
    if value is None:
        return None
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if typ is bool and not isinstance(value, bool):
        raise ConfigError(f"{key}: expected true or false, got {value!r}")
    if typ is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if not isinstance(value, typ):
        raise ConfigError(f"{key}: expected {typ.__name__}, got {value!r}")
    return value


@dataclass
class RunConfig:
    subcommand: str
    values: dict
    energy_params: dict = field(default_factory=dict)
    source: str = "<config>"

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str, default=None):
        v = self.values.get(key)
        return default if v is None else v

    def section(self, prefix: str) -> dict:
        p = prefix + "."
        return {k[len(p):]: v for k, v in self.values.items() if k.startswith(p) and v is not None}

    @property
    def energy_kind(self) -> str:
        return self.values["energy.kind"]

    def minimizer_config(self) -> MinimizerConfig:
        kw = self.section("minimizer")
        try:
            return MinimizerConfig(**kw, workers=self["run.workers"], seed=self["run.seed"])
        except ValueError as exc:
            raise ConfigError(f"minimizer: {exc}") from None

    def to_dict(self) -> dict:
        """Resolved settings without the execution-only keys (worker count, output directory)."""
        out = {k: v for k, v in self.values.items() if v is not None and k not in ("run.workers", "run.out")}
        out.update({f"energy.{k}": v for k, v in self.energy_params.items()})
        return dict(sorted(out.items()))


def build_config(subcommand: str, raw: dict, source: str = "<config>", overrides: dict | None = None) -> RunConfig:
    if subcommand not in SCHEMAS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    schema = dict(SCHEMAS[subcommand])
    uses_energy = subcommand in _ENERGY_DEFAULT
    if uses_energy:
        schema["energy.kind"] = (str, _ENERGY_DEFAULT[subcommand])
    raw = {**raw, **(overrides or {})}
    values, energy_params = {}, {}
    for key, value in raw.items():
        if uses_energy and key.startswith("energy.") and key != "energy.kind":
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{key}: energy parameters must be numbers")
            energy_params[key[len("energy."):]] = float(value)
            continue
        if key not in schema:
            raise ConfigError(f"{source}: key {key!r} is not valid for '{subcommand}'")
        values[key] = _coerce(key, value, schema[key][0])
    for key, (_, default) in schema.items():
        values.setdefault(key, default)
    cfg = RunConfig(subcommand, values, energy_params, source)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    v = cfg.values
    if v["run.seed"] < 0 or v["run.seed"] >= 2**64:
        raise ConfigError("run.seed must be an unsigned 64-bit integer")
    if v["run.workers"] < 1:
        raise ConfigError("run.workers must be >= 1")
    if "energy.kind" in v:
        from .energy import make_energy

        try:
            make_energy(v["energy.kind"], **cfg.energy_params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"energy: {exc}") from None
    if "mesh.resolution" in v and v["mesh.resolution"] < 1:
        raise ConfigError("mesh.resolution must be >= 1")
    if cfg.subcommand == "minimize":
        cfg.minimizer_config()
        kind = v["boundary.kind"]
        need = {"affine": "boundary.matrix", "squeeze": "boundary.factor", "twist": "boundary.angle",
                "table": "boundary.file"}
        if kind not in ("identity", *need):
            raise ConfigError(f"boundary.kind must be one of identity, affine, squeeze, twist, table; got {kind!r}")
        if kind in need and v[need[kind]] is None:
            raise ConfigError(f"boundary.kind = {kind} needs {need[kind]}")
    if cfg.subcommand == "check" and v["check.deformation"] is None:
        raise ConfigError("check needs check.deformation")
    if v.get("bound.M") is not None:
        if v["bound.M"] < 1:
            raise ConfigError("bound.M must be >= 1")
        dim = 3 if v.get("mesh.shape") == "unit-cube" else 2
        if v["bound.s"] <= dim - 1:
            raise ConfigError(f"bound.s must exceed n - 1 = {dim - 1}")
    if cfg.subcommand == "piola":
        if v["piola.levels"] < 2:
            raise ConfigError("piola.levels must be >= 2")
        if v["piola.sampling"] not in ("centroid", "vertex"):
            raise ConfigError("piola.sampling must be centroid or vertex")
    if cfg.subcommand == "cov":
        known = {"affine", "half_space", "fold", "grid_twist", "file"}
        bad = [c for c in v["cov.cases"] if c not in known]
        if bad:
            raise ConfigError(f"unknown cov case {bad[0]!r}; expected one of {sorted(known)}")
        if "file" in v["cov.cases"] and v["cov.deformation"] is None:
            raise ConfigError("cov case 'file' needs cov.deformation")


def load_config(subcommand: str, path, overrides: dict | None = None) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return build_config(subcommand, parse_text(text, str(p)), str(p), overrides)
