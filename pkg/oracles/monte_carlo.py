"""
╔══════════════════════════════════════════════════════════════════╗
║  MONTE-CARLO ORACLE: Use-and-Forget DL Capacity Bound            ║
║                                                                    ║
║  Simulates Rayleigh fading, noisy UL pilots, MMSE estimation and   ║
║  MR precoding, then evaluates the bound with the empirical mean   ║
║  effective gain as the UE's decoding reference.                    ║
╚══════════════════════════════════════════════════════════════════╝
"""

import logging
from typing import Optional

import numpy as np

from config.settings import FrameConfig
from core.performance import SEResult
from core.scenario import prelog
from strategies.pilot_assignment import PilotAssignment
from strategies.power_control import PowerAllocation

logger = logging.getLogger("oracle")


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def se_monte_carlo(alloc: PowerAllocation, beta, pilots: PilotAssignment, frame: FrameConfig,
                   rho_d: float, pilot_snr: float, draws: int, rng_seed: Optional[int] = None,
                   batch: int = 2000, perfect_csi: bool = False, policy: str = "monte_carlo") -> SEResult:
    """
    Empirical DL SE under the use-and-forget bound.

    With D_kj = Σ_l √ρ_lj g_lk ĝ*_lj the effective gain from UE j's stream to UE k:
        SINR_k = ρ_d |E D_kk|² / (ρ_d Σ_j E|D_kj|² − ρ_d |E D_kk|² + 1)
    """
    beta = np.asarray(beta, dtype=float)
    L, K = beta.shape
    rng = np.random.default_rng(rng_seed)
    u = np.sqrt(alloc.rho)
    c = pilots.contamination.astype(float)
    tp = frame.tau_up * pilot_snr
    mmse = np.sqrt(tp) * beta / (tp * (beta @ c) + 1.0)

    mean_d = np.zeros((K, K), dtype=complex)
    power_d = np.zeros((K, K))
    done = 0
    while done < draws:
        n = min(batch, draws - done)
        g = np.sqrt(beta) * _cn(rng, (n, L, K))
        if perfect_csi:
            g_hat = g
        else:
            noise = _cn(rng, (n, L, pilots.tau_up))[:, :, pilots.pilot_of]
            received = np.sqrt(tp) * (g @ c) + noise
            g_hat = mmse * received
        d = np.einsum("nlk,nlj->nkj", g, np.conj(g_hat) * u)
        mean_d += d.sum(axis=0)
        power_d += (np.abs(d) ** 2).sum(axis=0)
        done += n

    mean_d /= draws
    power_d /= draws
    desired = np.abs(np.diag(mean_d)) ** 2
    sinr = rho_d * desired / (rho_d * power_d.sum(axis=1) - rho_d * desired + 1.0)
    se = prelog(frame) * np.log2(1.0 + sinr)
    logger.info(f"Monte-Carlo SE over {draws} draws: min {se.min():.4f} bit/s/Hz")
    return SEResult(per_user_se=se, policy=policy)
