"""
╔══════════════════════════════════════════════════════════════════╗
║  STRIPE BUS: Sequential APU Compute-and-Forward                  ║
║                                                                    ║
║  DL: APU m transmits Σ_k √ρ_mk ĝ*_mk q_k from the bus streams     ║
║  UL: APU m forwards upstream_k + ĝ*_mk y_m for every stream k     ║
║  Only stream samples travel on the bus; CSI stays in each APU.    ║
╚══════════════════════════════════════════════════════════════════╝
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from config.settings import StripeConfig

logger = logging.getLogger("stripe")


@dataclass
class StreamFrame:
    streams: np.ndarray     # (K,) complex, one sample per UE stream

    def __post_init__(self):
        self.streams = np.asarray(self.streams, dtype=complex)

    @property
    def num_streams(self) -> int:
        return self.streams.size


@dataclass
class ApuState:
    index: int
    g_hat: np.ndarray       # (K,) local channel estimates
    sqrt_rho: np.ndarray    # (K,) local power coefficients

    def __post_init__(self):
        self.g_hat = np.asarray(self.g_hat, dtype=complex)
        self.sqrt_rho = np.asarray(self.sqrt_rho, dtype=float)
        if np.any(self.sqrt_rho < 0):
            raise ValueError(f"APU {self.index}: power coefficients must be >= 0")
        if self.g_hat.shape != self.sqrt_rho.shape:
            raise ValueError(f"APU {self.index}: {self.g_hat.size} estimates vs {self.sqrt_rho.size} coefficients")


@dataclass
class FronthaulReport:
    streams: int
    bit_rate: float         # bit/s


@dataclass
class StripeLoad:
    served_per_segment: np.ndarray     # UEs with a serving AP on each stripe segment
    fronthaul: FronthaulReport

    @property
    def mean_served(self) -> float:
        return float(self.served_per_segment.mean())

    def to_dict(self) -> dict:
        return {
            "served_per_segment": [int(n) for n in self.served_per_segment],
            "mean_served_streams": self.mean_served,
            "fronthaul_streams": self.fronthaul.streams,
            "fronthaul_bit_rate": self.fronthaul.bit_rate,
        }


def build_apus(g_hat, rho, first_index: int = 0) -> list[ApuState]:
    """One APU per AP row of the (L, K) estimate and power matrices."""
    g_hat = np.asarray(g_hat)
    sqrt_rho = np.sqrt(np.asarray(rho, dtype=float))
    return [ApuState(first_index + m, g_hat[m], sqrt_rho[m]) for m in range(g_hat.shape[0])]


def _check_order(apus: list[ApuState]):
    idx = [a.index for a in apus]
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise ValueError(f"APU indices must increase along the stripe, got {idx}")


# ── Per-APU processing ──────────────────────────────────────────

def dl_transmit(apu: ApuState, frame: StreamFrame) -> complex:
    if frame.num_streams != apu.g_hat.size:
        raise ValueError(f"frame carries {frame.num_streams} streams, APU {apu.index} expects {apu.g_hat.size}")
    return complex(np.sum(apu.sqrt_rho * np.conj(apu.g_hat) * frame.streams))


def ul_accumulate(apu: ApuState, received_sample: complex, upstream: StreamFrame) -> StreamFrame:
    if upstream.num_streams != apu.g_hat.size:
        raise ValueError(f"upstream carries {upstream.num_streams} streams, APU {apu.index} expects {apu.g_hat.size}")
    return StreamFrame(upstream.streams + np.conj(apu.g_hat) * received_sample)


# ── Whole-stripe runs ───────────────────────────────────────────

def ul_pipeline(apus: list[ApuState], received, upstream: Optional[StreamFrame] = None) -> StreamFrame:
    """
    Pass the frame through the APUs in stripe order. ``upstream`` is what
    arrives from a previous stripe segment (zeros for the first APU).
    """
    _check_order(apus)
    received = np.asarray(received, dtype=complex)
    frame = upstream if upstream is not None else StreamFrame(np.zeros(apus[0].g_hat.size))
    for apu, y in zip(apus, received):
        frame = ul_accumulate(apu, y, frame)
    return frame


def dl_superposition(apus: list[ApuState], frame: StreamFrame, g) -> np.ndarray:
    """Signal each UE receives when every APU transmits: y_k = Σ_m g_mk x_m, noise-free."""
    _check_order(apus)
    x = np.array([dl_transmit(apu, frame) for apu in apus])
    return np.asarray(g).T @ x


def segment_stripes(num_aps: int, aps_per_stripe: int) -> list[np.ndarray]:
    """Consecutive AP index blocks, one per stripe; the last block may be shorter."""
    if aps_per_stripe < 1:
        raise ValueError(f"aps_per_stripe must be >= 1, got {aps_per_stripe}")
    return [np.arange(s, min(s + aps_per_stripe, num_aps)) for s in range(0, num_aps, aps_per_stripe)]


# ── Capacity accounting ─────────────────────────────────────────

def served_streams(subsets: list, stripe_aps) -> int:
    """UEs with at least one serving AP on the stripe; only their streams ride the bus."""
    aps = set(int(a) for a in stripe_aps)
    return sum(1 for s in subsets if aps.intersection(int(a) for a in s))


def fronthaul_requirement(active_streams_per_frame, bandwidth_hz: float,
                          config: Optional[StripeConfig] = None) -> FronthaulReport:
    """Sized for the busiest frame: max simultaneous streams × B × bits per complex sample."""
    config = config or StripeConfig()
    counts = np.atleast_1d(np.asarray(active_streams_per_frame, dtype=int))
    if np.any(counts < 0):
        raise ValueError("stream counts must be >= 0")
    streams = int(counts.max()) if counts.size else 0
    return FronthaulReport(streams=streams, bit_rate=float(streams * bandwidth_hz * config.bits_per_sample))


def stripe_load(subsets: list, num_aps: int, bandwidth_hz: float,
                config: Optional[StripeConfig] = None) -> StripeLoad:
    """Served streams on each consecutive stripe segment, and the front-haul the busiest one needs."""
    config = config or StripeConfig()
    counts = np.array([served_streams(subsets, seg) for seg in segment_stripes(num_aps, config.aps_per_stripe)])
    return StripeLoad(served_per_segment=counts, fronthaul=fronthaul_requirement(counts, bandwidth_hz, config))


def backhaul_requirement(se_per_ue, served_ues, bandwidth_hz: float) -> float:
    """CPU-to-core rate in bit/s: sum rate of the UEs its stripes serve."""
    se = np.asarray(se_per_ue, dtype=float)
    return float(bandwidth_hz * se[np.asarray(served_ues, dtype=int)].sum())


def verify_stripe(num_aps: int = 50, num_ues: int = 8, frames: int = 100, seed: int = 0,
                  segments: int = 2) -> float:
    """
    Worst relative residual between the chained UL stripe and centralized
    MR combining Σ_l ĝ*_lk y_l, over random estimates and received frames.
    The stripe is split into ``segments`` chained pieces.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    per_stripe = -(-num_aps // segments)
    for _ in range(frames):
        g_hat = (rng.standard_normal((num_aps, num_ues)) + 1j * rng.standard_normal((num_aps, num_ues))) / np.sqrt(2)
        y = (rng.standard_normal(num_aps) + 1j * rng.standard_normal(num_aps)) / np.sqrt(2)
        apus = build_apus(g_hat, np.ones((num_aps, num_ues)))

        frame = None
        for block in segment_stripes(num_aps, per_stripe):
            frame = ul_pipeline([apus[m] for m in block], y[block], frame)

        centralized = np.conj(g_hat).T @ y
        residual = np.linalg.norm(frame.streams - centralized) / np.linalg.norm(centralized)
        worst = max(worst, float(residual))
    logger.info(f"Stripe verify: L={num_aps} K={num_ues} frames={frames} worst residual {worst:.3e}")
    return worst
