"""
╔══════════════════════════════════════════════════════════════════╗
║  POWER CONTROL: CD-FPT, Max-Min Fairness, RPB/CQB AP Selection   ║
║                                                                    ║
║  Per-AP budget:  Σ_k ρ_lk γ_lk ≤ 1                                ║
║  CD-FPT:         ρ_lk = 1 / Σ_k' γ_lk'                            ║
║  MMF:            bisection on t, SOC feasibility in u = √ρ        ║
║  RPB / CQB:      shortest descending prefix reaching α%           ║
╚══════════════════════════════════════════════════════════════════╝
"""

import csv
import logging
from dataclasses import dataclass, field
from typing import Optional

import cvxpy as cp
import numpy as np

from config.settings import PowerControlConfig
from core.errors import SolverError

logger = logging.getLogger("power")

_FEASIBLE = (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)
_INFEASIBLE = (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE)


@dataclass
class PowerAllocation:
    rho: np.ndarray                         # (L, K)
    subsets: list                           # K arrays of serving AP indices
    sinr_target: Optional[float] = None     # achieved max-min SINR (MMF only)
    ul_rho: Optional[np.ndarray] = None     # UL coefficients, stored only

    def __post_init__(self):
        if self.ul_rho is None:
            self.ul_rho = np.ones(self.rho.shape[1])

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.rho.shape, dtype=bool)
        for k, aps in enumerate(self.subsets):
            m[aps, k] = True
        return m

    def ap_load(self, gamma: np.ndarray) -> np.ndarray:
        """Σ_k ρ_lk γ_lk per AP; must stay ≤ 1."""
        return (self.rho * gamma).sum(axis=1)


@dataclass
class SelectionReport:
    alpha_pct: float
    avg_subset_fraction: float
    per_ue_sizes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def _subsets_from_mask(mask: np.ndarray) -> list:
    return [np.flatnonzero(mask[:, k]) for k in range(mask.shape[1])]


def _report(mask: np.ndarray, alpha_pct: float) -> SelectionReport:
    sizes = mask.sum(axis=0).astype(int)
    return SelectionReport(
        alpha_pct=alpha_pct,
        avg_subset_fraction=float(sizes.mean() / mask.shape[0]),
        per_ue_sizes=sizes,
    )


# ── Closed-form DL SINR ─────────────────────────────────────────

def dl_sinr(rho, gamma, beta, contamination, rho_d: float) -> np.ndarray:
    """Closed-form DL SINR with MR precoding and average-gain decoding.

    ``rho`` may carry leading batch axes, (..., L, K) -> (..., K).
    """
    rho = np.asarray(rho, dtype=float)
    c = np.asarray(contamination, dtype=bool)
    ug = np.sqrt(rho) * gamma
    signal = ug.sum(axis=-2)
    # m[j, k] = Σ_l √ρ_lj γ_lj β_lk / β_lj
    m = np.einsum("...lj,lk->...jk", ug / beta, beta)
    c_off = c & ~np.eye(c.shape[0], dtype=bool)
    pilot = (c_off * m ** 2).sum(axis=-2)
    beamforming = np.einsum("...lj,lk->...k", rho * gamma, beta)
    return rho_d * signal ** 2 / (rho_d * pilot + rho_d * beamforming + 1.0)


# ── CD-FPT ──────────────────────────────────────────────────────

def cdfpt(gamma: np.ndarray, mask: Optional[np.ndarray] = None) -> PowerAllocation:
    """Full power at every AP, user-uniform coefficients (over ``mask`` if given)."""
    L, K = gamma.shape
    mask = np.ones((L, K), dtype=bool) if mask is None else mask
    load = (gamma * mask).sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        per_ap = np.where(load > 0, 1.0 / load, 0.0)
    rho = np.broadcast_to(per_ap, (L, K)) * mask
    return PowerAllocation(rho=np.array(rho), subsets=_subsets_from_mask(mask))


# ── Max-min fairness ────────────────────────────────────────────

class MaxMinSolver:
    """
    Bisection over the common SINR target t.

    Variables are V_lk = √(ρ_lk γ_lk) plus one norm bound s_l ≥ ‖V_l·‖ per AP,
    so the per-AP budget is s_l ≤ 1 and the beamforming-uncertainty term
    of user k collapses to Σ_l ρ_d β_lk s_l². For a fixed t each user adds one
    second-order cone; the problem is compiled once and re-solved with a new
    value of the √t parameter. Among feasible points the solver returns the
    minimum-energy one, which keeps the iterate unique.
    """

    def __init__(self, gamma, beta, contamination, rho_d: float,
                 mask: Optional[np.ndarray] = None,
                 config: Optional[PowerControlConfig] = None):
        self.config = config or PowerControlConfig()
        self.gamma = np.asarray(gamma, dtype=float)
        self.beta = np.asarray(beta, dtype=float)
        self.contamination = np.asarray(contamination, dtype=bool)
        self.rho_d = float(rho_d)
        L, K = self.gamma.shape
        self.mask = np.ones((L, K), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        self._build()

    def _build(self):
        L, K = self.gamma.shape
        sg = np.sqrt(self.gamma)
        srd = np.sqrt(self.rho_d)

        self._V = cp.Variable((L, K), nonneg=True)
        self._s = cp.Variable(L, nonneg=True)
        self._sqrt_t = cp.Parameter(nonneg=True)

        constraints = [self._s <= 1, cp.norm(self._V, 2, axis=1) <= self._s]
        if not self.mask.all():
            constraints.append(cp.multiply(self._V, (~self.mask).astype(float)) == 0)

        signal = srd * cp.sum(cp.multiply(self._V, sg), axis=0)
        cross = srd * (cp.multiply(self._V, sg / self.beta).T @ self.beta)
        for k in range(K):
            terms = []
            copilots = [j for j in range(K) if j != k and self.contamination[j, k]]
            if copilots:
                terms.append(cross[np.array(copilots), k])
            terms.append(cp.multiply(np.sqrt(self.rho_d * self.beta[:, k]), self._s))
            terms.append(np.ones(1))
            constraints.append(signal[k] >= self._sqrt_t * cp.norm(cp.hstack(terms), 2))

        self._problem = cp.Problem(cp.Minimize(cp.sum_squares(self._V)), constraints)

    def _extract(self) -> np.ndarray:
        v = np.clip(np.nan_to_num(self._V.value), 0.0, None) * self.mask
        rho = v ** 2 / self.gamma
        load = (rho * self.gamma).sum(axis=1, keepdims=True)
        # absorb solver slack so the per-AP budget holds exactly
        scale = np.where(load > 1.0, 1.0 / np.maximum(load, 1e-300), 1.0)
        return rho * scale

    def _min_sinr(self, rho: np.ndarray) -> float:
        return float(dl_sinr(rho, self.gamma, self.beta, self.contamination, self.rho_d).min())

    def _attempt(self) -> Optional[str]:
        """Solve at the current √t; None when every configured solver failed numerically."""
        cfg = self.config
        solvers = [cfg.solver]
        if cfg.fallback_solver and cfg.fallback_solver != cfg.solver:
            solvers.append(cfg.fallback_solver)
        for solver in solvers:
            try:
                self._problem.solve(solver=solver)
            except cp.error.SolverError as e:
                logger.debug(f"MMF solver {solver or 'default'} failed: {e}")
                continue
            status = self._problem.status
            if status in _FEASIBLE or status in _INFEASIBLE:
                return status
            logger.debug(f"MMF solver {solver or 'default'} returned status {status}")
        return None

    def solve(self, initial: Optional[np.ndarray] = None) -> PowerAllocation:
        cfg = self.config
        L, K = self.gamma.shape
        best = cdfpt(self.gamma, self.mask).rho if initial is None else np.asarray(initial) * self.mask
        best_value = self._min_sinr(best)
        t_lo = best_value

        full = cdfpt(self.gamma).rho
        t_hi = float(dl_sinr(full, self.gamma, self.beta, self.contamination, self.rho_d).max()) * L
        t_hi = max(t_hi, 2 * t_lo, 1e-12)

        iteration = 0
        failures = 0
        while iteration < cfg.max_bisection_iters and t_hi - t_lo > cfg.bisection_tol * t_hi:
            iteration += 1
            t = 0.5 * (t_lo + t_hi)
            self._sqrt_t.value = np.sqrt(t * (1 + cfg.feasibility_margin))
            status = self._attempt()

            if status in _FEASIBLE:
                rho = self._extract()
                achieved = self._min_sinr(rho)
                if achieved >= t * (1 - cfg.bisection_tol):
                    if achieved > best_value:
                        best, best_value = rho, achieved
                    t_lo = max(t_lo, t, best_value)
                    if t_lo >= t_hi:
                        t_hi = 2 * t_lo
                else:
                    t_hi = t
            else:
                # infeasible, or not certified feasible at t: the incumbent stands
                if status is None:
                    failures += 1
                t_hi = t
            logger.debug(f"MMF iter {iteration}: t={t:.4g} status={status} bracket=[{t_lo:.4g}, {t_hi:.4g}]")

        if failures and not best_value > 0:
            raise SolverError("No feasible iterate", t_lo, t_hi, iteration, self._problem.status)
        if failures:
            logger.info(f"MMF: {failures} bisection steps uncertified, kept incumbent {best_value:.4g}")
        if t_hi - t_lo > cfg.bisection_tol * t_hi:
            logger.warning(
                f"MMF stopped after {iteration} iterations with bracket [{t_lo:.4g}, {t_hi:.4g}]"
            )
        return PowerAllocation(rho=best, subsets=_subsets_from_mask(self.mask), sinr_target=best_value)


def maxmin(gamma, beta, contamination, rho_d: float, tol: Optional[float] = None,
           mask: Optional[np.ndarray] = None, initial: Optional[np.ndarray] = None,
           config: Optional[PowerControlConfig] = None) -> PowerAllocation:
    config = config or PowerControlConfig()
    if tol is not None:
        if tol <= 0:
            raise ValueError(f"tol must be > 0, got {tol}")
        config = PowerControlConfig(**{**config.__dict__, "bisection_tol": tol})
    return MaxMinSolver(gamma, beta, contamination, rho_d, mask=mask, config=config).solve(initial)


# ── AP selection ────────────────────────────────────────────────

def prefix_mask(weights: np.ndarray, alpha_pct: float) -> np.ndarray:
    """Per column, the shortest descending-order prefix holding ≥ α% of the column sum."""
    if not 0 < alpha_pct <= 100:
        raise ValueError(f"alpha must be in (0, 100], got {alpha_pct}")
    w = np.asarray(weights, dtype=float)
    L, K = w.shape
    order = np.argsort(-w, axis=0, kind="stable")
    if alpha_pct >= 100:
        sizes = (w > 0).sum(axis=0)
    else:
        cum = np.cumsum(np.take_along_axis(w, order, axis=0), axis=0)
        target = alpha_pct / 100 * cum[-1] * (1 - 1e-12)
        sizes = np.argmax(cum >= target, axis=0) + 1
    sizes = np.clip(sizes, 1, L)

    mask = np.zeros((L, K), dtype=bool)
    for k in range(K):
        mask[order[: sizes[k], k], k] = True
    return mask


def select_rpb(alloc: PowerAllocation, gamma, alpha_pct: float = 95.0, beta=None,
               contamination=None, rho_d: Optional[float] = None,
               reoptimize: bool = True,
               config: Optional[PowerControlConfig] = None) -> tuple[PowerAllocation, SelectionReport]:
    """Received-power-based selection on ϱ_lk = √ρ_lk γ_lk, then MMF on the fixed pattern."""
    if reoptimize and (beta is None or contamination is None or rho_d is None):
        raise ValueError("reoptimize needs beta, contamination and rho_d")
    mask = prefix_mask(np.sqrt(alloc.rho) * gamma, alpha_pct)
    report = _report(mask, alpha_pct)
    zeroed = alloc.rho * mask
    if reoptimize:
        selected = maxmin(gamma, beta, contamination, rho_d, mask=mask, initial=zeroed, config=config)
    else:
        selected = PowerAllocation(rho=zeroed, subsets=_subsets_from_mask(mask))
    logger.info(f"RPB α={alpha_pct:g}%: avg subset {report.avg_subset_fraction:.1%} of APs")
    return selected, report


def select_cqb(beta, alpha_pct: float = 95.0) -> list:
    """Channel-quality-based subsets A_k from descending β."""
    return _subsets_from_mask(prefix_mask(beta, alpha_pct))


def mmf_cqb(gamma, beta, contamination, rho_d: float, alpha_pct: float = 95.0,
            reoptimize: bool = True, base: Optional[PowerAllocation] = None,
            config: Optional[PowerControlConfig] = None) -> tuple[PowerAllocation, SelectionReport]:
    mask = prefix_mask(beta, alpha_pct)
    report = _report(mask, alpha_pct)
    if reoptimize:
        initial = base.rho * mask if base is not None else None
        alloc = maxmin(gamma, beta, contamination, rho_d, mask=mask, initial=initial, config=config)
    else:
        source = base if base is not None else maxmin(gamma, beta, contamination, rho_d, config=config)
        alloc = PowerAllocation(rho=source.rho * mask, subsets=_subsets_from_mask(mask))
    logger.info(f"CQB α={alpha_pct:g}%: avg subset {report.avg_subset_fraction:.1%} of APs")
    return alloc, report


def power_subset_95(received_power, alpha_pct: float = 95.0) -> SelectionReport:
    """
    Subset of APs delivering α% (95 by default) of each UE's received power
    when every AP transmits at full power to that UE alone.

    ``received_power`` is β·P_max (or any ρ·γ-type products), shape (L, K).
    """
    return _report(prefix_mask(received_power, alpha_pct), alpha_pct)


def weakest_user_diagnostics(beta) -> dict:
    """Users are never dropped from service; this surfaces how weak the worst one is."""
    total = np.asarray(beta).sum(axis=0)
    k = int(np.argmin(total))
    return {
        "weakest_ue": k,
        "weakest_sum_beta_db": float(10 * np.log10(total[k])),
        "median_sum_beta_db": float(10 * np.log10(np.median(total))),
    }


def export_allocation_csv(alloc: PowerAllocation, path: str):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["ap_id", "ue_id", "rho"])
        for l, k in zip(*np.nonzero(alloc.rho)):
            writer.writerow([int(l), int(k), repr(float(alloc.rho[l, k]))])
