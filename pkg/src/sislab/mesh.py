"""Uniform 1D grid, grid functions, quadrature, and risk-set decompositions."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .expressions import Expression, parse_expression


def _frozen(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Grid:
    """Uniform mesh on [a, b] with composite-trapezoid quadrature weights."""

    a: float
    b: float
    nx: int
    dx: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def length(self) -> float:
        """Measure of the domain, b - a."""
        return self.b - self.a

    def window_mask(self, centers, radius: float) -> np.ndarray:
        """Boolean mask of nodes within ``radius`` of any of ``centers``."""
        centers = np.atleast_1d(np.asarray(centers, dtype=float))
        dist = np.abs(self.nodes[:, None] - centers[None, :])
        return (dist <= radius).any(axis=1)


def build_grid(a: float, b: float, nx: int) -> Grid:
    if b <= a:
        raise ValueError(f"right endpoint must exceed left endpoint, got [{a}, {b}]")
    if nx < 3:
        raise ValueError(f"need at least 3 nodes, got nx={nx}")
    nodes = np.linspace(a, b, nx)
    dx = (b - a) / (nx - 1)
    weights = np.full(nx, dx)
    weights[0] = weights[-1] = dx / 2
    return Grid(float(a), float(b), int(nx), float(dx), _frozen(nodes), _frozen(weights))


@dataclass(frozen=True)
class Field:
    """A real-valued grid function.

    Nonnegativity is not enforced here; operations that require it
    (densities, rates) check it themselves.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _frozen(np.broadcast_to(np.asarray(self.values, dtype=float), (self.grid.nx,)))
        if arr.shape != (self.grid.nx,):
            raise ValueError(f"field has {arr.shape[0]} values for a {self.grid.nx}-node grid")
        object.__setattr__(self, "values", arr)

    @staticmethod
    def constant(grid: Grid, value: float) -> "Field":
        return Field(grid, np.full(grid.nx, float(value)))

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())

    def mean(self) -> float:
        """Quadrature average over the domain."""
        return integrate(self) / self.grid.length


def eval_expression(grid: Grid, expr: str | Expression,
                    params: Mapping[str, float] | None = None) -> Field:
    """Evaluate a coefficient expression at every node of ``grid``."""
    if isinstance(expr, str):
        expr = parse_expression(expr)
    return Field(grid, expr.evaluate(grid.nodes, params))


def integrate(f: Field) -> float:
    """Composite-trapezoid approximation of the integral over the domain."""
    return float(f.grid.weights @ f.values)


def quadrature(grid: Grid, values: np.ndarray) -> float:
    """Trapezoid quadrature of raw nodal values (internal fast path)."""
    return float(grid.weights @ values)


class RiskMode(enum.Enum):
    MASS_ACTION = "mass_action"
    STD_INCIDENCE = "std_incidence"


@dataclass(frozen=True)
class RiskProfile:
    """Partition of the nodes into high/moderate/low-risk sets.

    The classification indicator is (N/|domain|)*beta - gamma under mass
    action and beta - gamma under standard incidence; values within
    ``tol_zero`` of zero land in the moderate set.
    """

    mode: RiskMode
    h_plus: np.ndarray
    h_zero: np.ndarray
    h_minus: np.ndarray
    tol_zero: float
    indicator: np.ndarray = field(repr=False)

    def plus_mask(self) -> np.ndarray:
        return _index_mask(self.h_plus, self.indicator.shape[0])

    def zero_mask(self) -> np.ndarray:
        return _index_mask(self.h_zero, self.indicator.shape[0])

    def minus_mask(self) -> np.ndarray:
        return _index_mask(self.h_minus, self.indicator.shape[0])


def _index_mask(indices: np.ndarray, n: int) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    mask[indices] = True
    return mask


def risk_sets(beta: Field, gamma: Field, N: float | None, mode: RiskMode,
              tol_zero: float | None = None) -> RiskProfile:
    """Classify every node by the sign of the local infection indicator."""
    _require_same_grid(beta, gamma)
    if beta.min() <= 0 or gamma.min() <= 0:
        raise ValueError("transmission and recovery rates must be positive at every node")
    if mode is RiskMode.MASS_ACTION:
        if N is None or N <= 0:
            raise ValueError("mass-action risk sets need a positive total population N")
        indicator = (N / beta.grid.length) * beta.values - gamma.values
    else:
        indicator = beta.values - gamma.values
    if tol_zero is None:
        tol_zero = 1e-9 * float(np.abs(indicator).max())
    plus = np.flatnonzero(indicator > tol_zero)
    minus = np.flatnonzero(indicator < -tol_zero)
    zero = np.flatnonzero(np.abs(indicator) <= tol_zero)
    return RiskProfile(mode, plus, zero, minus, float(tol_zero), _frozen(indicator))


def rmin_set(r: Field, I0: Field, tol_zero: float | None = None) -> tuple[float, np.ndarray]:
    """Minimum of the risk ratio over the support of I0, and where it is attained.

    Returns ``(r_min, indices)`` where the indices are restricted to the grid
    closure of the support (support nodes plus their immediate neighbours).
    """
    _require_same_grid(r, I0)
    if I0.min() < 0:
        raise ValueError("initial infected density must be nonnegative")
    support = I0.values > 0
    if not support.any():
        raise ValueError("initial infected density is identically zero")
    r_min = float(r.values[support].min())
    if tol_zero is None:
        tol_zero = 1e-9 * max(1.0, float(np.abs(r.values).max()))
    closure = support.copy()
    closure[1:] |= support[:-1]
    closure[:-1] |= support[1:]
    at_min = closure & (r.values <= r_min + tol_zero)
    return r_min, np.flatnonzero(at_min)


def _require_same_grid(*fields: Field) -> None:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid is not g and (f.grid.nx != g.nx or f.grid.a != g.a or f.grid.b != g.b):
            raise ValueError("fields live on different grids")
