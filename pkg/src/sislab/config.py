"""Run configuration: flat key=value files, built-in scenario presets, and
construction of model objects from expressions."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .mesh import Field, Grid, build_grid, eval_expression
from .models import ModelSpec, Variant

REQUIRED_KEYS = ("model", "beta_expr", "gamma_expr", "S0_expr", "I0_expr", "d_S", "d_I")

_DEFAULTS = {
    "x_min": 0.0,
    "x_max": 1.0,
    "nx": 201,
    "dt": 1e-3,
    "T": 200.0,
    "snapshot_every": 0.5,
    "steady_tol": 1e-7,
    "output_dir": ".",
}

# Scenario presets.  All share the unit interval, S0 = 2 + cos(pi x) and
# I0 = 1.5 + cos(pi x) (total population 3.5); sim1c swaps in a movable
# infected amplitude `a` for bifurcation sweeps.  Two presets override the
# default horizon/step: sim2c concentrates onto near-single-node spikes,
# which tightens the reaction stability bound, and sim4a approaches its
# limit only algebraically, which needs a longer horizon.
_COMMON = {
    "S0_expr": "2 + cos(pi*x)",
    "I0_expr": "1.5 + cos(pi*x)",
}

PRESETS: dict[str, dict[str, str]] = {
    "sim1a": {
        **_COMMON,
        "model": "mass_action_ds0",
        "beta_expr": "0.5",
        "gamma_expr": "4 - pi*sin(pi*x)",
        "d_S": "0",
        "d_I": "1",
    },
    "sim1b": {
        **_COMMON,
        "model": "mass_action_ds0",
        "beta_expr": "2",
        "gamma_expr": "4 - pi*sin(pi*x)",
        "d_S": "0",
        "d_I": "1",
    },
    "sim1c": {
        **_COMMON,
        "model": "mass_action_ds0",
        # nonconstant transmission with sign-changing S0 - gamma/beta, so no
        # closed-form threshold applies; int gamma/beta ~ 2.82
        "beta_expr": "0.5*(1 + x)",
        "gamma_expr": "4 - pi*sin(pi*x)",
        # clamp keeps the movable initial datum nonnegative at small a
        "I0_expr": "max(a + cos(pi*x), 0)",
        "param.a": "1.5",
        "d_S": "0",
        "d_I": "1",
        "T": "40",
    },
    "sim2a": {
        **_COMMON,
        "model": "mass_action_di0",
        "beta_expr": "0.2",
        "gamma_expr": "4 - pi*sin(pi*x)",
        "d_S": "1",
        "d_I": "0",
    },
    "sim2b": {
        **_COMMON,
        "model": "mass_action_di0",
        "beta_expr": "1",
        "gamma_expr": "4 - pi*sin(pi*x)",
        "d_S": "1",
        "d_I": "0",
    },
    "sim2c": {
        **_COMMON,
        "model": "mass_action_di0",
        "beta_expr": "2",
        "gamma_expr": "14 - 4*pi*sin(4*pi*x)",
        "d_S": "1",
        "d_I": "0",
        "T": "60",
        "dt": "5e-4",
    },
    "sim3a": {
        **_COMMON,
        "model": "std_incidence_ds0",
        "beta_expr": "1 + sin(pi*x)",
        "gamma_expr": "1.5",
        "d_S": "0",
        "d_I": "1",
    },
    "sim3b": {
        **_COMMON,
        "model": "std_incidence_ds0",
        "beta_expr": "2.5 + sin(pi*x)",
        "gamma_expr": "1.5 + sin(pi*x)",
        "d_S": "0",
        "d_I": "1",
    },
    "sim3c": {
        **_COMMON,
        "model": "std_incidence_ds0",
        "beta_expr": "2 - sin(pi*x)",
        "gamma_expr": "1",
        "d_S": "0",
        "d_I": "1",
    },
    "sim4a": {
        **_COMMON,
        "model": "std_incidence_di0",
        "beta_expr": "2 - abs(x - 0.5)^0.5",
        "gamma_expr": "1.5",
        "d_S": "1",
        "d_I": "0",
        "T": "1000",
        "dt": "5e-3",
    },
    "sim4b": {
        **_COMMON,
        "model": "std_incidence_di0",
        "beta_expr": "2 - sin(pi*x)",
        "gamma_expr": "1.5",
        "d_S": "1",
        "d_I": "0",
    },
}

OBSERVABLES = ("I_mass_at_T", "final_sup_I", "concentration_fraction")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: str
    beta_expr: str
    gamma_expr: str
    S0_expr: str
    I0_expr: str
    d_S: float
    d_I: float
    nx: int = 201
    x_min: float = 0.0
    x_max: float = 1.0
    dt: float = 1e-3
    T: float = 200.0
    snapshot_every: float = 0.5
    steady_tol: float = 1e-7
    output_dir: str = "."
    preset: str | None = None
    params: dict = field(default_factory=dict)

    def with_overrides(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)

    def build(self) -> tuple[ModelSpec, Grid, Field, Field]:
        grid = build_grid(self.x_min, self.x_max, self.nx)
        beta = eval_expression(grid, self.beta_expr, self.params)
        gamma = eval_expression(grid, self.gamma_expr, self.params)
        S0 = eval_expression(grid, self.S0_expr, self.params)
        I0 = eval_expression(grid, self.I0_expr, self.params)
        spec = ModelSpec(Variant.parse(self.model), beta, gamma,
                         d_S=self.d_S, d_I=self.d_I)
        return spec, grid, S0, I0

    def run_kwargs(self) -> dict:
        return {
            "dt": self.dt,
            "T": self.T,
            "snapshot_every": self.snapshot_every,
            "steady_tol": self.steady_tol,
        }

    def to_mapping(self) -> dict[str, str]:
        out = {
            "model": self.model,
            "beta_expr": self.beta_expr,
            "gamma_expr": self.gamma_expr,
            "S0_expr": self.S0_expr,
            "I0_expr": self.I0_expr,
            "d_S": repr(self.d_S),
            "d_I": repr(self.d_I),
            "nx": str(self.nx),
            "x_min": repr(self.x_min),
            "x_max": repr(self.x_max),
            "dt": repr(self.dt),
            "T": repr(self.T),
            "snapshot_every": repr(self.snapshot_every),
            "steady_tol": repr(self.steady_tol),
            "output_dir": self.output_dir,
        }
        for name, value in self.params.items():
            out[f"param.{name}"] = repr(value)
        return out


@dataclass(frozen=True)
class SweepConfig:
    base: RunConfig
    parameter: str
    lo: float
    hi: float
    count: int
    observable: str

    def values(self):
        import numpy as np

        return np.linspace(self.lo, self.hi, self.count)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, tuple[str, int]]:
    """Parse `key = value` lines; returns {key: (value, line_number)}."""
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in entries:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        entries[key] = (value, lineno)
    return entries


def preset_config(name: str, **overrides) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: "
                          + ", ".join(sorted(PRESETS)))
    cfg = _config_from_strings({k: (v, 0) for k, v in PRESETS[name].items()},
                               source=f"preset {name}")
    cfg = cfg.with_overrides(preset=name, **overrides)
    return cfg


def load_config(path, overrides: dict[str, str] | None = None) -> RunConfig:
    text = Path(path).read_text()
    entries = parse_config_text(text, source=str(path))
    if overrides:
        for key, value in overrides.items():
            entries[key] = (value, 0)
    return config_from_entries(entries, source=str(path))


def config_from_entries(entries: dict[str, tuple[str, int]],
                        source: str = "<config>") -> RunConfig:
    entries = dict(entries)
    preset_name = entries.pop("preset", None)
    if preset_name is not None:
        name = preset_name[0]
        if name not in PRESETS:
            raise ConfigError(f"{source}: unknown preset {name!r}; available: "
                              + ", ".join(sorted(PRESETS)))
        merged = {k: (v, 0) for k, v in PRESETS[name].items()}
        merged.update(entries)
        cfg = _config_from_strings(merged, source)
        return cfg.with_overrides(preset=name)
    missing = [k for k in REQUIRED_KEYS if k not in entries]
    if missing:
        raise ConfigError(f"{source}: missing required keys: {', '.join(missing)} "
                          f"(or give preset = <name>)")
    return _config_from_strings(entries, source)


_FLOAT_KEYS = {"d_S", "d_I", "x_min", "x_max", "dt", "T", "snapshot_every", "steady_tol"}
_INT_KEYS = {"nx"}
_STR_KEYS = {"model", "beta_expr", "gamma_expr", "S0_expr", "I0_expr", "output_dir"}
_SWEEP_KEYS = {"sweep_parameter", "sweep_lo", "sweep_hi", "sweep_count", "sweep_observable"}


def _config_from_strings(entries: dict[str, tuple[str, int]], source: str) -> RunConfig:
    kwargs: dict = dict(_DEFAULTS)
    params: dict[str, float] = {}
    for key, (value, lineno) in entries.items():
        where = f"{source}:{lineno}" if lineno else source
        if key in _STR_KEYS:
            kwargs[key] = value
        elif key in _FLOAT_KEYS:
            kwargs[key] = _parse_float(value, key, where)
        elif key in _INT_KEYS:
            kwargs[key] = _parse_int(value, key, where)
        elif key.startswith("param."):
            params[key[len("param."):]] = _parse_float(value, key, where)
        elif key in _SWEEP_KEYS:
            continue  # consumed by sweep_config_from_entries
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")
    missing = [k for k in REQUIRED_KEYS if k not in kwargs]
    if missing:
        raise ConfigError(f"{source}: missing required keys: {', '.join(missing)}")
    kwargs["params"] = params
    return RunConfig(**kwargs)


def sweep_config_from_entries(entries: dict[str, tuple[str, int]],
                              source: str = "<config>") -> SweepConfig:
    base = config_from_entries(
        {k: v for k, v in entries.items() if k not in _SWEEP_KEYS}, source)
    try:
        parameter = entries["sweep_parameter"][0]
        lo = _parse_float(entries["sweep_lo"][0], "sweep_lo", source)
        hi = _parse_float(entries["sweep_hi"][0], "sweep_hi", source)
        count = _parse_int(entries["sweep_count"][0], "sweep_count", source)
    except KeyError as exc:
        raise ConfigError(f"{source}: sweep needs sweep_parameter, sweep_lo, "
                          f"sweep_hi, sweep_count (missing {exc.args[0]})") from None
    observable = entries.get("sweep_observable", ("I_mass_at_T", 0))[0]
    if observable not in OBSERVABLES:
        raise ConfigError(f"{source}: unknown observable {observable!r}; "
                          f"choose from {', '.join(OBSERVABLES)}")
    if not lo < hi:
        raise ConfigError(f"{source}: sweep range needs lo < hi")
    if count < 2:
        raise ConfigError(f"{source}: sweep needs at least 2 points")
    return SweepConfig(base, parameter, lo, hi, count, observable)


def load_sweep_config(path, overrides: dict[str, str] | None = None) -> SweepConfig:
    text = Path(path).read_text()
    entries = parse_config_text(text, source=str(path))
    if overrides:
        for key, value in overrides.items():
            entries[key] = (value, 0)
    return sweep_config_from_entries(entries, source=str(path))


def _parse_float(value: str, key: str, where: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{where}: {key} expects a real number, got {value!r}") from None


def _parse_int(value: str, key: str, where: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{where}: {key} expects an integer, got {value!r}") from None
