"""
╔══════════════════════════════════════════════════════════════════╗
║  CHANNEL: Large-Scale Fading, Rayleigh Fading, MMSE Estimates    ║
║                                                                    ║
║  β_lk = 10^(−PL_dB/10), PL one-slope (indoor) or three-slope     ║
║  g_lk = √β_lk · z_lk, z ~ CN(0, 1) i.i.d.                         ║
║  γ_lk = τρβ² / (τρ Σ_k' β_lk' c(k,k') + 1)                       ║
╚══════════════════════════════════════════════════════════════════╝
"""

import csv
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from config.settings import FrameConfig, PathLossModel, PathLossParams, ScenarioConfig
from core.scenario import Layout, pairwise_distances

logger = logging.getLogger("channel")


@dataclass
class LargeScaleMatrix:
    beta: np.ndarray    # (L, K) linear power gains

    def __post_init__(self):
        if np.any(self.beta <= 0):
            raise ValueError("Large-scale fading coefficients must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.beta.shape


@dataclass
class ChannelRealization:
    g: np.ndarray       # (L, K) complex; column k is UE k's channel vector h


@dataclass
class EstimateQuality:
    gamma: np.ndarray   # (L, K) variance of the MMSE estimate ĝ_lk


# ── Link budget ─────────────────────────────────────────────────

def noise_power_w(bandwidth_hz: float, noise_figure_db: float) -> float:
    noise_dbm = -174.0 + 10 * math.log10(bandwidth_hz) + noise_figure_db
    return 10 ** ((noise_dbm - 30) / 10)


def hata_cost231_constant(freq_hz: float, ap_height_m: float, ue_height_m: float) -> float:
    """Three-slope L constant (dB) from the Hata-COST231 form, f in MHz."""
    f_mhz = freq_hz / 1e6
    lf = math.log10(f_mhz)
    a_hue = (1.1 * lf - 0.7) * ue_height_m - (1.56 * lf - 0.8)
    return 46.3 + 33.9 * lf - 13.82 * math.log10(ap_height_m) - a_hue


# ── Path loss ───────────────────────────────────────────────────

def pathloss_db(d_m, params: PathLossParams, shadowing=None) -> np.ndarray:
    """Deterministic path loss in dB, plus optional shadowing samples X (dB)."""
    d = np.maximum(np.asarray(d_m, dtype=float), params.min_distance_m)
    x = 0.0 if shadowing is None else shadowing

    if params.model == PathLossModel.ONE_SLOPE:
        p = params.one_slope
        return p.pl_d0_db + 10 * p.exponent_n * np.log10(d / p.d0_m) + x

    p = params.three_slope
    d_km = d / 1000.0
    d0_km, d1_km = p.d0_m / 1000.0, p.d1_m / 1000.0
    far = p.L_const_db + 35 * np.log10(d_km) + x
    mid = p.L_const_db + 15 * np.log10(d1_km) + 20 * np.log10(d_km)
    near = p.L_const_db + 15 * np.log10(d1_km) + 20 * np.log10(d0_km)
    return np.where(d > p.d1_m, far, np.where(d > p.d0_m, mid, near))


def shadow_sigma_db(params: PathLossParams) -> float:
    if params.model == PathLossModel.ONE_SLOPE:
        return params.one_slope.shadow_sigma_db
    return params.three_slope.shadow_sigma_db


def large_scale(layout: Layout, config: ScenarioConfig, rng_seed: Optional[int] = None,
                rng: Optional[np.random.Generator] = None) -> LargeScaleMatrix:
    """β for every AP/UE pair with i.i.d. log-normal shadowing."""
    rng = rng if rng is not None else np.random.default_rng(rng_seed)
    d = pairwise_distances(layout, config)
    sigma = shadow_sigma_db(config.pathloss)
    shadow = rng.normal(0.0, sigma, d.shape) if sigma > 0 else np.zeros(d.shape)
    pl = pathloss_db(d, config.pathloss, shadow)
    return LargeScaleMatrix(beta=10 ** (-pl / 10))


def small_scale(beta: LargeScaleMatrix, rng_seed: Optional[int] = None,
                rng: Optional[np.random.Generator] = None) -> ChannelRealization:
    rng = rng if rng is not None else np.random.default_rng(rng_seed)
    z = (rng.standard_normal(beta.shape) + 1j * rng.standard_normal(beta.shape)) / np.sqrt(2)
    return ChannelRealization(g=np.sqrt(beta.beta) * z)


# ── Channel estimation ──────────────────────────────────────────

def contamination(pilot_of) -> np.ndarray:
    """c(k,k') = 1 when UEs k and k' share a pilot (k'=k included)."""
    pilot_of = np.asarray(pilot_of)
    return pilot_of[:, None] == pilot_of[None, :]


def estimate_quality(beta: LargeScaleMatrix, pilot_of, frame: FrameConfig,
                     pilot_snr: float) -> EstimateQuality:
    if pilot_snr <= 0:
        raise ValueError(f"pilot_snr must be > 0, got {pilot_snr}")
    b = beta.beta
    c = contamination(pilot_of).astype(float)
    if c.shape[0] != b.shape[1]:
        raise ValueError(f"pilot assignment covers {c.shape[0]} UEs, beta has {b.shape[1]}")
    tp = frame.tau_up * pilot_snr
    gamma = tp * b ** 2 / (tp * (b @ c) + 1.0)
    return EstimateQuality(gamma=gamma)


def export_beta_csv(beta: LargeScaleMatrix, path: str):
    """Rows are APs, columns are UEs."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["ap_id"] + [f"ue_{k}" for k in range(beta.shape[1])])
        for l, row in enumerate(beta.beta):
            writer.writerow([l] + [repr(float(v)) for v in row])
