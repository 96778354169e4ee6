"""Flat dotted-key run configuration.

The file is TOML restricted to scalar and array values under dotted keys::

    grid.N = 256
    phi.family = "power"
    phi.p = 2
    f.kind = "constant"
    f.value = 1.0
    init.kind = "ellipse"
    init.a = 1.2
    init.b = 0.8333333333333334

Nested tables are flattened, so ``[grid]\\nN = 256`` is equivalent.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any, Dict

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError, InvalidGridError, NonConvexError, NonPositiveSupportError
from .flow import FlowConfig
from .geometry import DensityField, SupportField, make_grid, support_to_geometry
from .orlicz import make_power, make_power_log

_NUM = (int, float)

# key -> (types, default); a default of REQUIRED must be supplied
REQUIRED = object()
OPTIONAL = None

_BODY_KEYS = {
    "kind": (str, OPTIONAL),
    "r": (_NUM, OPTIONAL),
    "a": (_NUM, OPTIONAL),
    "b": (_NUM, OPTIONAL),
    "coeffs": (list, OPTIONAL),
}

SCHEMA: Dict[str, tuple] = {
    "grid.N": (int, REQUIRED),
    "grid.scheme": (str, "spectral"),
    "phi.family": (str, REQUIRED),
    "phi.p": (_NUM, OPTIONAL),
    "f.kind": (str, "constant"),
    "f.value": (_NUM, 1.0),
    "f.coeffs": (list, OPTIONAL),
    **{f"init.{k}": v for k, v in _BODY_KEYS.items()},
    **{f"init2.{k}": v for k, v in _BODY_KEYS.items()},
    "time.dt_safety": (_NUM, 0.2),
    "time.t_max": (_NUM, 50.0),
    "time.max_steps": (int, OPTIONAL),
    "stop.rhs_tol": (_NUM, 1e-8),
    "stop.gamma_cv_tol": (_NUM, 1e-6),
    "output.every": (int, 10),
    "output.dir": (str, "out"),
    "output.snapshot_every": (int, 0),
    "run.skip_hypothesis_check": (bool, False),
}

PHI_FAMILIES = ("power", "power-log")
F_KINDS = ("constant", "cosine-series")
BODY_KINDS = ("circle", "ellipse", "cosine-series")


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _typename(types):
    if isinstance(types, tuple):
        return "number"
    return {int: "integer", str: "string", bool: "boolean", list: "array"}[types]


@dataclass
class RunConfig:
    values: Dict[str, Any]
    path: str = ""
    raw: Dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def N(self):
        return self.values["grid.N"]

    @property
    def scheme(self):
        return self.values["grid.scheme"]

    @property
    def output_dir(self):
        return self.values["output.dir"]

    @property
    def skip_hypothesis_check(self):
        return self.values["run.skip_hypothesis_check"]

    def grid(self):
        return make_grid(self.N)

    def phi(self):
        fam, p = self.values["phi.family"], self.values["phi.p"]
        return make_power(p) if fam == "power" else make_power_log(p)

    def density(self, grid=None):
        grid = grid or self.grid()
        if self.values["f.kind"] == "constant":
            return DensityField.constant(grid, self.values["f.value"])
        return DensityField.cosine_series(grid, self.values["f.coeffs"])

    def body(self, prefix="init", grid=None):
        grid = grid or self.grid()
        v = lambda k: self.values[f"{prefix}.{k}"]
        kind = v("kind")
        if kind == "circle":
            return SupportField.circle(grid, v("r"))
        if kind == "ellipse":
            return SupportField.ellipse(grid, v("a"), v("b"))
        return SupportField.cosine_series(grid, v("coeffs"))

    def flow_config(self, prefix="init"):
        grid = self.grid()
        return FlowConfig(
            phi=self.phi(),
            f=self.density(grid),
            init=self.body(prefix, grid),
            dt_safety=float(self.values["time.dt_safety"]),
            t_max=float(self.values["time.t_max"]),
            rhs_tol=float(self.values["stop.rhs_tol"]),
            gamma_cv_tol=float(self.values["stop.gamma_cv_tol"]),
            record_every=self.values["output.every"],
            scheme=self.scheme,
            max_steps=self.values["time.max_steps"],
        )

    def echo(self):
        """Explicitly set keys, for snapshot and summary provenance."""
        return dict(sorted(self.raw.items()))


def parse_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("", f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("", f"cannot parse {path}: {exc}") from None
    cfg = config_from_mapping(_flatten(data))
    cfg.path = str(path)
    return cfg


def config_from_mapping(raw: Dict[str, Any]) -> RunConfig:
    raw = _flatten(raw)
    for key in raw:
        if key not in SCHEMA:
            raise ConfigError(key, "unknown key")
    values = {}
    for key, (types, default) in SCHEMA.items():
        if key in raw:
            val = raw[key]
            ok = isinstance(val, types) and not (types is not bool and isinstance(val, bool))
            if not ok:
                raise ConfigError(key, f"expected {_typename(types)}, got {val!r}")
            values[key] = val
        elif default is REQUIRED:
            raise ConfigError(key, "missing required key")
        else:
            values[key] = default
    _validate(values)
    return RunConfig(values=values, raw=dict(raw))


def _positive(values, key):
    if not values[key] > 0:
        raise ConfigError(key, f"must be positive, got {values[key]!r}")


def _validate_body(values, prefix, required):
    kind = values[f"{prefix}.kind"]
    if kind is None:
        if required:
            raise ConfigError(f"{prefix}.kind", f"missing required key (one of {BODY_KINDS})")
        return
    if kind not in BODY_KINDS:
        raise ConfigError(f"{prefix}.kind", f"must be one of {BODY_KINDS}, got {kind!r}")
    needs = {"circle": ("r",), "ellipse": ("a", "b"), "cosine-series": ("coeffs",)}[kind]
    for k in needs:
        key = f"{prefix}.{k}"
        if values[key] is None:
            raise ConfigError(key, f"missing parameter for {prefix}.kind = {kind!r}")
        if k != "coeffs":
            _positive(values, key)
    if kind == "cosine-series":
        _validate_coeffs(values, f"{prefix}.coeffs")


def _validate_coeffs(values, key):
    coeffs = values[key]
    if not coeffs or not all(isinstance(c, _NUM) and not isinstance(c, bool) for c in coeffs):
        raise ConfigError(key, "must be a non-empty array of numbers (coefficients of cos 2k theta)")


def _validate(values):
    N = values["grid.N"]
    if N < 16 or N % 2:
        raise ConfigError("grid.N", f"grid.N must be even ≥ 16, got {N}")
    if values["grid.scheme"] not in ("spectral", "central"):
        raise ConfigError("grid.scheme", "must be 'spectral' or 'central'")

    fam = values["phi.family"]
    if fam not in PHI_FAMILIES:
        raise ConfigError("phi.family", f"must be one of {PHI_FAMILIES}, got {fam!r}")
    if values["phi.p"] is None:
        raise ConfigError("phi.p", f"missing parameter p for phi.family = {fam!r}")
    if fam == "power" and values["phi.p"] == 0:
        raise ConfigError("phi.p", "must be nonzero for the power family")

    kind = values["f.kind"]
    if kind not in F_KINDS:
        raise ConfigError("f.kind", f"must be one of {F_KINDS}, got {kind!r}")
    if kind == "constant":
        _positive(values, "f.value")
    else:
        if values["f.coeffs"] is None:
            raise ConfigError("f.coeffs", "missing parameter for f.kind = 'cosine-series'")
        _validate_coeffs(values, "f.coeffs")

    _validate_body(values, "init", required=True)
    _validate_body(values, "init2", required=False)

    d = values["time.dt_safety"]
    if not 0 < d <= 1:
        raise ConfigError("time.dt_safety", f"must lie in (0, 1], got {d!r}")
    for key in ("time.t_max", "stop.rhs_tol", "stop.gamma_cv_tol"):
        _positive(values, key)
    if values["time.max_steps"] is not None and values["time.max_steps"] < 0:
        raise ConfigError("time.max_steps", "must be >= 0")
    if values["output.every"] < 1:
        raise ConfigError("output.every", "must be >= 1")
    if values["output.snapshot_every"] < 0:
        raise ConfigError("output.snapshot_every", "must be >= 0")

    out = values["output.dir"]
    probe = out if os.path.isdir(out) else os.path.dirname(os.path.abspath(out))
    while not os.path.exists(probe):
        probe = os.path.dirname(probe)
    if not os.access(probe, os.W_OK):
        raise ConfigError("output.dir", f"not writable: {out}")

    # data-level checks: density positive, bodies positive and strictly convex
    grid = make_grid(N)
    cfg = RunConfig(values=values)
    try:
        cfg.density(grid)
    except ValueError as exc:
        raise ConfigError("f.coeffs" if kind != "constant" else "f.value", str(exc)) from None
    for prefix in ("init", "init2"):
        if values[f"{prefix}.kind"] is None:
            continue
        try:
            support_to_geometry(cfg.body(prefix, grid), values["grid.scheme"])
        except (NonConvexError, NonPositiveSupportError, InvalidGridError) as exc:
            raise ConfigError(f"{prefix}.kind", f"initial body rejected: {exc}") from None
