"""Critical population size by eigenvalue-constrained maximization.

Maximizes the linear functional int(lam*S0 + (1-lam)*r) over nodewise
lam in [0, 1] subject to sigma(d_I, beta*lam*(S0-r)) <= 0.  The feasible
set is convex (the eigenvalue is a supremum of linear functionals of the
potential) and the objective is linear, so projected gradient ascent with
an exact penalty converges globally; multi-start guards against flat KKT
points on the box boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Field, quadrature
from .spectral import principal_eigenvalue


@dataclass(frozen=True)
class OptimizerOptions:
    tol: float = 1e-6            # KKT residual / relative objective tolerance
    feas_tol: float = 1e-8       # allowed eigenvalue at the returned point
    max_iter: int = 200          # projected-gradient iterations per start
    penalty_rounds: int = 3      # exact-penalty escalations
    random_starts: int = 1
    seed: int = 0
    eig_tol: float = 1e-12


@dataclass(frozen=True)
class ThresholdResult:
    n_star: float
    lambda_star: Field
    sigma_at_opt: float
    lower_bound: float
    upper_bound: float
    converged: bool
    iterations: int


def sigma_sensitivity(d: float, h: Field, tol: float = 1e-12) -> Field:
    """First-order sensitivity of the principal eigenvalue to the potential.

    Returns the squared eigenfunction (unit weighted norm); the derivative
    of sigma with respect to the potential value at node i is the node's
    quadrature weight times this field.
    """
    eig = principal_eigenvalue(d, h, tol=tol)
    phi = np.asarray(eig.phi.values)
    return Field(h.grid, phi * phi)


class _ConstrainedProblem:
    def __init__(self, S0: Field, r: Field, beta: Field, d_I: float, eig_tol: float):
        self.grid = S0.grid
        self.w = np.asarray(self.grid.weights)
        self.gap = np.asarray(S0.values) - np.asarray(r.values)
        self.beta = np.asarray(beta.values)
        self.d_I = d_I
        self.eig_tol = eig_tol
        self.base = quadrature(self.grid, np.asarray(r.values))
        self.grad_objective = self.w * self.gap
        self._phi_warm = None
        self.evals = 0

    def objective(self, lam: np.ndarray) -> float:
        return self.base + float(self.grad_objective @ lam)

    def sigma(self, lam: np.ndarray) -> tuple[float, np.ndarray]:
        h = Field(self.grid, self.beta * lam * self.gap)
        eig = principal_eigenvalue(self.d_I, h, tol=self.eig_tol, start=self._phi_warm)
        self._phi_warm = np.asarray(eig.phi.values)
        self.evals += 1
        phi2 = self._phi_warm * self._phi_warm
        grad_sigma = self.w * phi2 * self.beta * self.gap
        return eig.sigma, grad_sigma

    def kkt_residual(self, lam, g, grad_sigma) -> float:
        scale = float(np.abs(self.grad_objective).max()) or 1.0
        free = (lam > 1e-12) & (lam < 1.0 - 1e-12)
        candidates = [0.0]
        for sel in (free, np.ones_like(lam, dtype=bool)):
            if sel.any():
                denom = float(grad_sigma[sel] @ grad_sigma[sel])
                if denom > 0.0:
                    candidates.append(max(0.0, float(
                        self.grad_objective[sel] @ grad_sigma[sel]) / denom))
        best = np.inf
        for mu in candidates:
            stepped = np.clip(lam + (self.grad_objective - mu * grad_sigma) / scale,
                              0.0, 1.0)
            best = min(best, float(np.abs(stepped - lam).max()))
        return best if g <= 0 else max(best, g)


def critical_population(S0: Field, r: Field, beta: Field, d_I: float,
                        opts: OptimizerOptions | None = None) -> ThresholdResult:
    """Threshold population below which susceptible-lockdown extinction
    outcomes remain possible; see module docstring for the program solved."""
    if S0.min() < 0:
        raise ValueError("initial susceptible density must be nonnegative")
    if r.min() <= 0 or beta.min() <= 0:
        raise ValueError("risk ratio and transmission rate must be positive")
    if d_I <= 0:
        raise ValueError("infected dispersal rate must be positive")
    opts = opts or OptimizerOptions()
    prob = _ConstrainedProblem(S0, r, beta, d_I, opts.eig_tol)
    grid = S0.grid

    lower = prob.base
    upper = quadrature(grid, np.maximum(np.asarray(S0.values), np.asarray(r.values)))

    rng = np.random.default_rng(opts.seed)
    starts = [np.zeros(grid.nx), (prob.gap > 0).astype(float)]
    starts += [rng.uniform(0.0, 1.0, grid.nx) for _ in range(opts.random_starts)]

    best_lam = np.zeros(grid.nx)
    best_obj = prob.objective(best_lam)      # lam = 0 is always feasible
    best_sigma = prob.sigma(best_lam)[0]
    any_converged = False
    total_iters = 0

    for start in starts:
        lam, obj, sig, converged, iters = _ascend(prob, start, opts)
        total_iters += iters
        any_converged = any_converged or converged
        if sig <= opts.feas_tol and obj > best_obj:
            best_lam, best_obj, best_sigma = lam, obj, sig

    return ThresholdResult(
        n_star=best_obj,
        lambda_star=Field(grid, best_lam),
        sigma_at_opt=best_sigma,
        lower_bound=lower,
        upper_bound=upper,
        converged=any_converged,
        iterations=total_iters,
    )


def _ascend(prob: _ConstrainedProblem, lam0: np.ndarray, opts: OptimizerOptions):
    lam = np.clip(lam0, 0.0, 1.0)
    sig, grad_sigma = prob.sigma(lam)
    rho = 10.0 * max(1.0, _multiplier_guess(prob, grad_sigma))
    converged = False
    iters = 0
    step = 1.0 / (float(np.abs(prob.grad_objective).max()) or 1.0)

    for _ in range(opts.penalty_rounds):
        lam, sig, grad_sigma, converged, step, used = _penalty_loop(
            prob, lam, sig, grad_sigma, rho, step, opts)
        iters += used
        if sig <= opts.feas_tol:
            break
        rho *= 10.0

    lam, sig = _restore_feasibility(prob, lam, sig, opts)
    # The exact penalty stalls in a zigzag at its kink; finish with gradient
    # projection along the active constraint (tangent step + first-order
    # restoration), which the convexity of the feasible set makes reliable.
    lam, sig, polish_converged, used = _tangent_polish(prob, lam, opts)
    iters += used
    return lam, prob.objective(lam), sig, converged or polish_converged, iters


def _tangent_polish(prob: _ConstrainedProblem, lam: np.ndarray,
                    opts: OptimizerOptions):
    sig, grad_sigma = prob.sigma(lam)
    best_obj = prob.objective(lam)
    scale = float(np.abs(prob.grad_objective).max()) or 1.0
    t = 0.5 / scale
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        residual = prob.kkt_residual(lam, sig, grad_sigma)
        if residual < opts.tol and sig <= opts.feas_tol:
            converged = True
            break
        mu = _active_multiplier(prob, lam, grad_sigma) if sig >= -opts.feas_tol else 0.0
        direction = prob.grad_objective - mu * grad_sigma
        direction = np.where((lam <= 0.0) & (direction < 0.0), 0.0, direction)
        direction = np.where((lam >= 1.0) & (direction > 0.0), 0.0, direction)
        if float(np.abs(direction).max()) <= opts.tol * scale:
            converged = sig <= opts.feas_tol
            break
        moved = False
        while t > 1e-12 / scale:
            cand = np.clip(lam + t * direction, 0.0, 1.0)
            cand_sig, _ = prob.sigma(cand)
            cand, cand_sig = _restore_feasibility(prob, cand, cand_sig, opts)
            cand_obj = prob.objective(cand)
            if cand_obj > best_obj + 1e-14 * max(1.0, abs(best_obj)):
                lam, sig = cand, cand_sig
                best_obj = cand_obj
                sig, grad_sigma = prob.sigma(lam)
                t = min(t * 1.5, 1e3 / scale)
                moved = True
                break
            t *= 0.5
        if not moved:
            break
    return lam, sig, converged, it


def _active_multiplier(prob: _ConstrainedProblem, lam: np.ndarray,
                       grad_sigma: np.ndarray) -> float:
    free = (lam > 1e-12) & (lam < 1.0 - 1e-12)
    sel = free if free.any() else np.ones_like(lam, dtype=bool)
    denom = float(grad_sigma[sel] @ grad_sigma[sel])
    if denom == 0.0:
        return 0.0
    return max(0.0, float(prob.grad_objective[sel] @ grad_sigma[sel]) / denom)


def _penalty_loop(prob, lam, sig, grad_sigma, rho, step, opts):
    def penalized(obj, sigma):
        return obj - rho * max(sigma, 0.0)

    obj = prob.objective(lam)
    value = penalized(obj, sig)
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        direction = prob.grad_objective - (rho if sig > 0 else 0.0) * grad_sigma
        moved = False
        for _ in range(30):
            cand = np.clip(lam + step * direction, 0.0, 1.0)
            gain_ref = float(direction @ (cand - lam))
            if gain_ref <= 0.0:
                break
            cand_sig, cand_grad = prob.sigma(cand)
            cand_obj = prob.objective(cand)
            cand_val = penalized(cand_obj, cand_sig)
            if cand_val >= value + 1e-4 * gain_ref:
                lam, sig, grad_sigma = cand, cand_sig, cand_grad
                obj, value = cand_obj, cand_val
                step = min(step * 1.5, 1e6)
                moved = True
                break
            step *= 0.5
        residual = prob.kkt_residual(lam, sig, grad_sigma)
        if residual < opts.tol and sig <= opts.feas_tol:
            converged = True
            break
        if not moved and step < 1e-14:
            break
        if not moved:
            # direction was uphill in the penalty model but rejected; the
            # kink of the exact penalty is pinning the iterate
            break
    return lam, sig, grad_sigma, converged, step, it


def _restore_feasibility(prob, lam, sig, opts):
    # First-order corrections along the eigenvalue gradient restore
    # sigma <= 0; the eigenvalue is smooth in lam so this converges fast.
    for _ in range(50):
        if sig <= opts.feas_tol:
            return lam, sig
        _, grad_sigma = prob.sigma(lam)
        denom = float(grad_sigma @ grad_sigma)
        if denom == 0.0:
            break
        lam = np.clip(lam - (sig + opts.feas_tol) * grad_sigma / denom, 0.0, 1.0)
        sig, _ = prob.sigma(lam)
    if sig > opts.feas_tol:
        lam = np.zeros_like(lam)
        sig, _ = prob.sigma(lam)
    return lam, sig


def _multiplier_guess(prob, grad_sigma) -> float:
    denom = float(grad_sigma @ grad_sigma)
    if denom == 0.0:
        return 1.0
    return abs(float(prob.grad_objective @ grad_sigma)) / denom
