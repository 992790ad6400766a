"""Per-snapshot monitored quantities: mass, Lyapunov values, Harnack ratio,
and the concentration metric for point-mass limits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mesh import Field, RiskMode, quadrature, risk_sets, rmin_set
from .operators import gradient_energy_values


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    total_mass: float
    lyapunov: Optional[float]
    lyapunov_dissipation: Optional[float]
    harnack_ratio: Optional[float]
    concentration_fraction: Optional[float]
    sup_change_rate: float

    CSV_COLUMNS = (
        "t",
        "total_mass",
        "lyapunov",
        "lyapunov_dissipation",
        "harnack_ratio",
        "concentration_fraction",
        "sup_change_rate",
    )


def lyapunov_mass_action_di0(S: Field, I: Field, beta: Field, r: Field,
                             d_S: float) -> tuple[float, float]:
    """Energy V = int(S^2/2 + r*I) and its dissipation rate.

    Along the infected-locked mass-action flow, dV/dt equals minus the
    returned dissipation (gradient energy of S plus the weighted squared
    distance of S from the risk ratio on the infected set).
    """
    grid = S.grid
    Sv, Iv = np.asarray(S.values), np.asarray(I.values)
    rv, bv = np.asarray(r.values), np.asarray(beta.values)
    V = quadrature(grid, 0.5 * Sv * Sv + rv * Iv)
    dissipation = d_S * gradient_energy_values(Sv, grid.dx) \
        + quadrature(grid, bv * (Sv - rv) ** 2 * Iv)
    return V, dissipation


def lyapunov_std_ds0(S: Field, I: Field, beta: Field, gamma: Field, d_I: float,
                     eps_reg: float = 1e-12, tol_zero: float | None = None
                     ) -> tuple[float, float]:
    """Energy V = int(kappa*S^2 + I^2)/2 with kappa = (beta-gamma)/gamma.

    Only defined where transmission dominates recovery everywhere; rejects
    inputs where beta < gamma beyond the tolerance band.  The weight makes
    dV/dt = -dissipation an exact identity of the semi-discrete system;
    note the ratio is taken against gamma, which is what the dissipation
    form requires.
    """
    grid = S.grid
    bv, gv = np.asarray(beta.values), np.asarray(gamma.values)
    if tol_zero is None:
        tol_zero = 1e-9 * float(np.abs(bv - gv).max(initial=1.0))
    if float((bv - gv).min()) < -tol_zero:
        raise ValueError("this energy requires beta >= gamma at every node")
    kappa = np.maximum(bv - gv, 0.0) / gv
    Sv, Iv = np.asarray(S.values), np.asarray(I.values)
    V = 0.5 * quadrature(grid, kappa * Sv * Sv + Iv * Iv)
    tot = Sv + Iv
    safe = np.where(tot > eps_reg, tot, 1.0)
    reaction = np.where(tot > eps_reg, gv * (kappa * Sv - Iv) ** 2 * Iv / safe, 0.0)
    dissipation = d_I * gradient_energy_values(Iv, grid.dx) + quadrature(grid, reaction)
    return V, dissipation


def lyapunov_std_di0(S: Field, I: Field, beta: Field, gamma: Field, d_S: float,
                     high_mask: np.ndarray, eps_reg: float = 1e-12
                     ) -> tuple[float, float, float, float]:
    """Energy V = int(S^2 + kappa*I^2)/2, kappa = gamma/(beta-gamma) on the
    high-risk infected support, and the three terms of its rate.

    Returns (V, gradient_term, lowrisk_term, highrisk_term) with
    dV/dt = -gradient_term + lowrisk_term - highrisk_term.  The low-risk
    term is sign-indefinite, so V need not decay monotonically.
    """
    grid = S.grid
    Sv, Iv = np.asarray(S.values), np.asarray(I.values)
    bv, gv = np.asarray(beta.values), np.asarray(gamma.values)
    kappa = np.zeros(grid.nx)
    kappa[high_mask] = gv[high_mask] / (bv[high_mask] - gv[high_mask])
    V = 0.5 * quadrature(grid, Sv * Sv + kappa * Iv * Iv)

    term_grad = d_S * gradient_energy_values(Sv, grid.dx)

    tot = Sv + Iv
    safe = np.where(tot > eps_reg, tot, 1.0)
    incidence = np.where(tot > eps_reg, bv * Sv * Iv / safe, 0.0)
    low = np.where(high_mask, 0.0, Sv * (-incidence + gv * Iv))
    term_lowrisk = quadrature(grid, low)

    high = np.where(
        high_mask & (tot > eps_reg),
        np.maximum(bv - gv, 0.0) * (Sv - kappa * Iv) ** 2 * Iv / safe,
        0.0,
    )
    term_highrisk = quadrature(grid, high)
    return V, term_grad, term_lowrisk, term_highrisk


def harnack_ratio(I: Field) -> Optional[float]:
    """max/min of a positive profile; None when the minimum is not positive."""
    lo = I.min()
    if lo <= 0:
        return None
    return I.max() / lo


def concentration_fraction(I: Field, min_indices, eps_radius: float) -> float:
    """Share of the infected mass within ``eps_radius`` of the minimum set."""
    grid = I.grid
    Iv = np.asarray(I.values)
    total = quadrature(grid, Iv)
    if total <= 0:
        raise ValueError("concentration fraction needs positive infected mass")
    mask = grid.window_mask(grid.nodes[np.asarray(min_indices, dtype=int)], eps_radius)
    return quadrature(grid, np.where(mask, Iv, 0.0)) / total


class DiagnosticsContext:
    """Per-run wiring: which energy, which component the Harnack ratio tracks,
    and the concentration target for point-mass limits."""

    def __init__(self, spec, I0: Field, eps_radius: float = 0.05):
        self.spec = spec
        self.eps_radius = eps_radius
        variant = spec.variant
        self.harnack_on_s = variant.locks_i
        self.min_indices = None
        self.high_mask = None
        self.std_energy_ok = False
        if variant.mass_action and variant.locks_i:
            r = spec.risk_ratio()
            _, self.min_indices = rmin_set(r, I0)
            self.r = r
        elif variant.std_incidence and variant.locks_s:
            gap = np.asarray(spec.beta.values) - np.asarray(spec.gamma.values)
            self.std_energy_ok = float(gap.min()) >= -1e-9 * max(1.0, float(np.abs(gap).max()))
        elif variant.std_incidence and variant.locks_i:
            profile = risk_sets(spec.beta, spec.gamma, None, RiskMode.STD_INCIDENCE)
            support = np.asarray(I0.values) > 0
            self.high_mask = profile.plus_mask() & support

    def record(self, prev_state, state, sup_change_rate: float) -> DiagnosticsRecord:
        spec = self.spec
        S, I = state.S, state.I
        total_mass = state.total_mass()

        V = dissipation = None
        variant = spec.variant
        if variant.mass_action and variant.locks_i:
            V, dissipation = lyapunov_mass_action_di0(S, I, spec.beta, self.r, spec.d_S)
        elif variant.std_incidence and variant.locks_s and self.std_energy_ok:
            V, dissipation = lyapunov_std_ds0(S, I, spec.beta, spec.gamma, spec.d_I,
                                              spec.eps_reg)
        elif variant.std_incidence and variant.locks_i:
            V, grad, low, high = lyapunov_std_di0(S, I, spec.beta, spec.gamma,
                                                  spec.d_S, self.high_mask, spec.eps_reg)
            dissipation = grad - low + high

        ratio = harnack_ratio(S if self.harnack_on_s else I)

        conc = None
        if self.min_indices is not None and quadrature(I.grid, np.asarray(I.values)) > 0:
            conc = concentration_fraction(I, self.min_indices, self.eps_radius)

        return DiagnosticsRecord(
            t=state.t,
            total_mass=total_mass,
            lyapunov=V,
            lyapunov_dissipation=dissipation,
            harnack_ratio=ratio,
            concentration_fraction=conc,
            sup_change_rate=sup_change_rate,
        )
