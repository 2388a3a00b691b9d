"""
╔══════════════════════════════════════════════════════════════════╗
║  PERFORMANCE: Spectral Efficiency, CDFs, Macro-Diversity         ║
║                                                                    ║
║  SE_k = prelog · log2(1 + SINR_k)  (closed-form DL lower bound)   ║
║  95%-likely SE = empirical 5th percentile, lower interpolation    ║
║  Channel gain: ‖h‖² (cell-free) vs max_l |h_l|² (cellular)        ║
║  Favorable propagation: |h1^H h2|² / (‖h1‖² ‖h2‖²)               ║
╚══════════════════════════════════════════════════════════════════╝
"""

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from config.settings import FrameConfig, GainMode, ScenarioConfig
from core.channel import pathloss_db, shadow_sigma_db
from core.errors import DegenerateVectorError
from core.scenario import distance, place_aps, prelog
from strategies.power_control import PowerAllocation, dl_sinr

logger = logging.getLogger("performance")


@dataclass
class SEResult:
    per_user_se: np.ndarray     # bit/s/Hz
    policy: str = ""
    drop: int = 0

    @property
    def min_se(self) -> float:
        return float(self.per_user_se.min())


@dataclass
class CdfSummary:
    samples: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def percentile(self, p: float) -> float:
        return float(np.percentile(self.samples, p, method="lower"))

    @property
    def likely95(self) -> float:
        """Value exceeded by 95% of the samples."""
        if self.samples.size < 20:
            logger.warning(f"95%-likely value from only {self.samples.size} samples")
        return self.percentile(5)

    @property
    def median(self) -> float:
        return self.percentile(50)

    def cumulative(self) -> np.ndarray:
        n = self.samples.size
        return np.arange(1, n + 1) / n


def cdf_summary(samples) -> CdfSummary:
    values = np.sort(np.asarray(samples, dtype=float).ravel())
    if values.size == 0:
        raise ValueError("cdf_summary needs at least one sample")
    return CdfSummary(samples=values)


def write_cdf_csv(summary: CdfSummary, path: str):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["value", "cumulative_probability"])
        for v, p in zip(summary.samples, summary.cumulative()):
            writer.writerow([repr(float(v)), repr(float(p))])


# ── Spectral efficiency ─────────────────────────────────────────

def se_closed_form(alloc: PowerAllocation, gamma, beta, contamination, rho_d: float,
                   frame: FrameConfig, policy: str = "", drop: int = 0) -> SEResult:
    sinr = dl_sinr(alloc.rho, gamma, beta, contamination, rho_d)
    se = prelog(frame) * np.log2(1.0 + sinr)

    cap = prelog(frame) * math.log2(1.0 + rho_d * float(np.sum(beta)) * beta.shape[0])
    if np.any(se > cap):
        logger.warning(f"SE above sanity cap {cap:.3f} (policy={policy} drop={drop})")
    return SEResult(per_user_se=se, policy=policy, drop=drop)


# ── Macro-diversity and favorable propagation ───────────────────

def channel_gain_stats(realizations, mode: GainMode = GainMode.CELLFREE) -> CdfSummary:
    """dB-domain CDF of the channel gain; channel vectors run along the last axis."""
    h = np.asarray(realizations)
    power = np.abs(h) ** 2
    gain = power.sum(axis=-1) if mode == GainMode.CELLFREE else power.max(axis=-1)
    return cdf_summary(10 * np.log10(gain))


def orthogonality(h1, h2):
    """Squared normalized inner product; smaller means closer to orthogonal.

    Accepts single vectors or stacks of vectors along the last axis.
    """
    h1 = np.asarray(h1)
    h2 = np.asarray(h2)
    n1 = np.sum(np.abs(h1) ** 2, axis=-1)
    n2 = np.sum(np.abs(h2) ** 2, axis=-1)
    if np.any(n1 == 0) or np.any(n2 == 0):
        raise DegenerateVectorError("orthogonality is undefined for a zero channel vector")
    inner = np.sum(np.conj(h1) * h2, axis=-1)
    value = np.abs(inner) ** 2 / (n1 * n2)
    return float(value) if np.ndim(value) == 0 else value


def channel_hardening(realizations) -> np.ndarray:
    """Var(‖h‖²) / E[‖h‖²]² per UE from draws shaped (draws, K, L); 0 means fully hardened."""
    norms = np.sum(np.abs(np.asarray(realizations)) ** 2, axis=-1)
    return norms.var(axis=0) / norms.mean(axis=0) ** 2


def isd_config(config: ScenarioConfig, isd_m: float) -> ScenarioConfig:
    """Grid scenario with the area resized so neighbor APs sit isd_m apart."""
    side = math.isqrt(config.num_aps) * isd_m
    return replace(config, area_width_m=side, area_height_m=side).validate()


def iter_channels(config: ScenarioConfig, draws: int, rng: np.random.Generator,
                  chunk: int = 256):
    """Yield (n, K, L) channel stacks: fresh UE drop, shadowing and fading per draw."""
    aps = place_aps(config)
    K = config.num_ues
    sigma = shadow_sigma_db(config.pathloss)
    for start in range(0, draws, chunk):
        n = min(chunk, draws - start)
        ues = np.stack([
            rng.uniform(0, config.area_width_m, (n, K)),
            rng.uniform(0, config.area_height_m, (n, K)),
            np.full((n, K), config.ue_height_m),
        ], axis=-1)
        d = distance(ues[:, :, None, :], aps[None, None, :, :], config)
        shadow = rng.normal(0.0, sigma, d.shape) if sigma > 0 else None
        beta = 10 ** (-pathloss_db(d, config.pathloss, shadow) / 10)
        z = (rng.standard_normal(d.shape) + 1j * rng.standard_normal(d.shape)) / np.sqrt(2)
        yield np.sqrt(beta) * z


def channel_gain_experiment(config: ScenarioConfig, isd_m: float, draws: int,
                            seed: int = 0) -> dict:
    """Cell-free vs cellular channel-gain CDFs for one inter-site distance."""
    cfg = isd_config(config, isd_m)
    cellfree, cellular = [], []
    for h in iter_channels(cfg, draws, np.random.default_rng(seed)):
        cellfree.append(channel_gain_stats(h, GainMode.CELLFREE).samples)
        cellular.append(channel_gain_stats(h, GainMode.CELLULAR).samples)
    result = {
        GainMode.CELLFREE.value: cdf_summary(np.concatenate(cellfree)),
        GainMode.CELLULAR.value: cdf_summary(np.concatenate(cellular)),
    }
    logger.info(
        f"ISD {isd_m:g} m: median gain cell-free {result['cellfree'].median:.1f} dB, "
        f"cellular {result['cellular'].median:.1f} dB"
    )
    return result


def favorable_propagation_stats(config: ScenarioConfig, pairs: int, seed: int = 0,
                                isd_m: Optional[float] = None) -> CdfSummary:
    """CDF of the orthogonality measure over random two-UE drops."""
    cfg = replace(config, num_ues=2)
    if isd_m is not None:
        cfg = isd_config(cfg, isd_m)
    values = [
        orthogonality(h[:, 0, :], h[:, 1, :])
        for h in iter_channels(cfg, pairs, np.random.default_rng(seed))
    ]
    return cdf_summary(np.concatenate(values))
