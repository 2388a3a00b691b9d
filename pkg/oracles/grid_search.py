"""
Grid-search reference for max-min power control on two-user instances.

Each AP's normalized powers V_lk = √(ρ_lk γ_lk) lie in the quarter disc
‖V_l‖ ≤ 1, parametrized as (r_l cos θ_l, r_l sin θ_l). A coarse grid over
(r, θ) for every AP is refined around the incumbent by zooming in a few times.
"""

import logging

import numpy as np

from strategies.power_control import dl_sinr

logger = logging.getLogger("oracle")


def _rho_from_points(points: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    L = gamma.shape[0]
    r = points[:, :L]
    theta = points[:, L:]
    v = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)   # (N, L, 2)
    return v ** 2 / gamma


def _evaluate(points, gamma, beta, contamination, rho_d):
    rho = _rho_from_points(points, gamma)
    return dl_sinr(rho, gamma, beta, contamination, rho_d).min(axis=-1)


def maxmin_grid_search(gamma, beta, contamination, rho_d: float, coarse: int = 31,
                       refine: int = 11, rounds: int = 6) -> tuple[float, np.ndarray]:
    """Best min-SINR found and its ρ (L, 2)."""
    gamma = np.asarray(gamma, dtype=float)
    beta = np.asarray(beta, dtype=float)
    L, K = gamma.shape
    if K != 2:
        raise ValueError(f"grid search is defined for two users, got K={K}")

    lower = np.zeros(2 * L)
    upper = np.concatenate([np.ones(L), np.full(L, np.pi / 2)])

    axes = [np.linspace(lo, hi, coarse) for lo, hi in zip(lower, upper)]
    points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2 * L)
    values = _evaluate(points, gamma, beta, contamination, rho_d)
    best = points[np.argmax(values)]
    best_value = float(values.max())
    half = (upper - lower) / (coarse - 1)

    for _ in range(rounds):
        axes = [np.linspace(max(lo, c - w), min(hi, c + w), refine)
                for lo, hi, c, w in zip(lower, upper, best, half)]
        points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2 * L)
        values = _evaluate(points, gamma, beta, contamination, rho_d)
        if values.max() > best_value:
            best, best_value = points[np.argmax(values)], float(values.max())
        half = 2 * half / (refine - 1)

    logger.debug(f"Grid search best min-SINR {best_value:.6g}")
    return best_value, _rho_from_points(best[None, :], gamma)[0]
