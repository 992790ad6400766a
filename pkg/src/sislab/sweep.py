"""Parameter sweep driver: one simulation per parameter value, a sorted
table of observables, and knee detection by the largest second difference."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import models
from .config import RunConfig, SweepConfig
from .mesh import quadrature


@dataclass(frozen=True)
class SweepPoint:
    parameter: float
    value: float | None
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    observable: str
    parameter: str
    points: list[SweepPoint]
    knee: float | None

    def table(self) -> list[tuple[float, float | None, str | None]]:
        return [(p.parameter, p.value, p.error) for p in self.points]


_SWEEPABLE_FIELDS = ("d_S", "d_I", "dt", "T", "snapshot_every", "steady_tol")


def _evaluate_point(payload) -> tuple[float, float | None, str | None]:
    mapping, parameter, value, observable = payload
    cfg = RunConfig(**mapping)
    if parameter in _SWEEPABLE_FIELDS:
        cfg = cfg.with_overrides(**{parameter: value})
    else:
        cfg = cfg.with_overrides(params={**cfg.params, parameter: value})
    try:
        spec, grid, S0, I0 = cfg.build()
        traj = models.run(spec, S0, I0, **cfg.run_kwargs())
        return value, _extract_observable(traj, observable), None
    except Exception as exc:  # per-point failures recorded, sweep continues
        return value, None, f"{type(exc).__name__}: {exc}"


def _extract_observable(traj: models.Trajectory, observable: str) -> float:
    final = traj.final
    if observable == "I_mass_at_T":
        return quadrature(traj.spec.grid, np.asarray(final.I.values))
    if observable == "final_sup_I":
        return float(np.asarray(final.I.values).max())
    if observable == "concentration_fraction":
        fractions = [r.concentration_fraction for r in traj.diagnostics
                     if r.concentration_fraction is not None]
        if not fractions:
            raise ValueError("this model variant records no concentration fraction")
        return fractions[-1]
    raise ValueError(f"unknown observable {observable!r}")


def run_sweep(cfg: SweepConfig, jobs: int = 1) -> SweepResult:
    """Run the sweep, optionally across processes; the table stays sorted."""
    base_mapping = {k: getattr(cfg.base, k) for k in (
        "model", "beta_expr", "gamma_expr", "S0_expr", "I0_expr", "d_S", "d_I",
        "nx", "x_min", "x_max", "dt", "T", "snapshot_every", "steady_tol",
        "output_dir", "preset", "params")}
    payloads = [(base_mapping, cfg.parameter, float(v), cfg.observable)
                for v in cfg.values()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_evaluate_point, payloads))
    else:
        rows = [_evaluate_point(p) for p in payloads]
    rows.sort(key=lambda r: r[0])
    points = [SweepPoint(*row) for row in rows]
    knee = detect_knee([(p.parameter, p.value) for p in points])
    return SweepResult(cfg.observable, cfg.parameter, points, knee)


def detect_knee(pairs) -> float | None:
    """Parameter value with the largest curvature (second difference).

    Returns None for fewer than three usable points or an essentially
    constant observable.
    """
    usable = [(p, v) for p, v in pairs if v is not None and math.isfinite(v)]
    if len(usable) < 3:
        return None
    params = np.array([p for p, _ in usable])
    vals = np.array([v for _, v in usable])
    if vals.max() - vals.min() <= 1e-12 * max(1.0, abs(vals).max()):
        return None
    second = np.abs(vals[2:] - 2.0 * vals[1:-1] + vals[:-2])
    return float(params[1 + int(np.argmax(second))])
