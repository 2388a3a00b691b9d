"""
╔══════════════════════════════════════════════════════════════════╗
║  SYNC: Clock-Bias Measurement and Recovery for AP Triplets       ║
║                                                                    ║
║  Each AP i has a transmit bias t_i and a receive bias r_i.        ║
║  AP i pulses at its local zero; AP j stamps δ_ij = t_i − r_j.      ║
║  Three rounds give six δ, from which every t_i − r_i and          ║
║  t_i − t_j follows. Neighbor triplets are linked through one      ║
║  cross-group pulse, so a stripe calibrates left to right.         ║
╚══════════════════════════════════════════════════════════════════╝
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from config.settings import SyncConfig
from core.errors import MeasurementError

logger = logging.getLogger("sync")

# Off-diagonal (i, j) order used for noise draws and delay lookups.
_PAIRS = [(i, j) for i in range(3) for j in range(3) if i != j]


@dataclass
class ClockBias:
    t: float    # transmitter bias (s)
    r: float    # receiver bias (s)


@dataclass
class TimestampMatrix:
    """3x3 arrival times; delta[i, j] is AP j's stamp of AP i's pulse, diagonal unused."""
    delta: np.ndarray

    def __post_init__(self):
        self.delta = np.array(self.delta, dtype=float)
        if self.delta.shape != (3, 3):
            raise MeasurementError(f"timestamp matrix must be 3x3, got {self.delta.shape}")
        off = ~np.eye(3, dtype=bool)
        if not np.all(np.isfinite(self.delta[off])):
            raise MeasurementError("timestamp matrix is missing off-diagonal measurements")
        np.fill_diagonal(self.delta, np.nan)

    def __sub__(self, other: "TimestampMatrix") -> "TimestampMatrix":
        return TimestampMatrix(self.delta - other.delta)


@dataclass
class CalibrationResult:
    reciprocity: np.ndarray     # t_i − r_i, i = 1..3
    sync: np.ndarray            # (t1 − t2, t1 − t3, t2 − t3)

    @property
    def cycle_residual(self) -> float:
        """(t1−t2) + (t2−t3) − (t1−t3); zero up to rounding for noiseless rounds."""
        return float(self.sync[0] + self.sync[2] - self.sync[1])

    def offsets_from_first(self) -> np.ndarray:
        """t_i − t_1 for the three APs."""
        return np.array([0.0, -self.sync[0], -self.sync[1]])


@dataclass
class ChainCalibration:
    group_offsets: np.ndarray           # (G,) t_first(g) − t_first(0)
    ap_offsets: np.ndarray              # (G, 3) t_i − t_first(0)
    rounds: list = field(default_factory=list)   # per-group CalibrationResult


# ── Three-AP round ──────────────────────────────────────────────

def stripe_delays(positions_m, speed_of_light: float = SyncConfig.speed_of_light) -> np.ndarray:
    """Pairwise propagation delays (s) between APs at 1D positions along a stripe."""
    x = np.asarray(positions_m, dtype=float)
    return np.abs(x[:, None] - x[None, :]) / speed_of_light


def measure_round(biases: list[ClockBias], sigma_ns: float = 0.0,
                  rng: Optional[np.random.Generator] = None,
                  delays: Optional[np.ndarray] = None) -> TimestampMatrix:
    """
    Run the three pulse steps. Without delays this is δ_ij = t_i − r_j;
    known propagation delays d_ij add to each stamp, and sigma_ns adds
    zero-mean Gaussian noise per stamp.
    """
    if len(biases) != 3:
        raise MeasurementError(f"a measurement round needs exactly 3 APs, got {len(biases)}")
    t = np.array([b.t for b in biases], dtype=float)
    r = np.array([b.r for b in biases], dtype=float)
    delta = t[:, None] - r[None, :]
    if delays is not None:
        delta = delta + np.asarray(delays, dtype=float)
    if sigma_ns > 0:
        rng = rng if rng is not None else np.random.default_rng()
        noise = rng.normal(0.0, sigma_ns * 1e-9, len(_PAIRS))
        for (i, j), n in zip(_PAIRS, noise):
            delta[i, j] += n
    return TimestampMatrix(delta)


def recover(delta: TimestampMatrix, delays: Optional[np.ndarray] = None) -> CalibrationResult:
    """Closed-form reciprocity and synchronization errors from one round.

    Passing ``delays`` subtracts the known propagation delays first.
    """
    d = delta.delta if delays is None else delta.delta - np.asarray(delays, dtype=float)
    d12, d13 = d[0, 1], d[0, 2]
    d21, d23 = d[1, 0], d[1, 2]
    d31, d32 = d[2, 0], d[2, 1]
    reciprocity = np.array([
        d12 + d31 - d32,
        d21 + d32 - d31,
        d31 + d23 - d21,
    ])
    sync = np.array([
        d13 - d23,
        d12 - d32,
        d21 - d31,
    ])
    return CalibrationResult(reciprocity=reciprocity, sync=sync)


def differential(delta_before: TimestampMatrix, delta_after: TimestampMatrix) -> CalibrationResult:
    """Bias evolution between two rounds, up to a drift common to the whole group."""
    return recover(delta_after - delta_before)


# ── Inter-group linking ─────────────────────────────────────────

@dataclass
class Arrival:
    """One stamped pulse: who sent it and which AP of the receiving group stamped it."""
    value: float        # s, receiver-local
    transmitter: int
    receiver: int


def intergroup_offset(cross: Arrival, local: Arrival) -> float:
    """
    t_i^A − t_j^B from AP_k of group B stamping AP_i of group A (``cross``)
    and AP_j of its own group (``local``).
    """
    if cross.receiver != local.receiver:
        raise MeasurementError(
            f"intergroup offset needs one receiver, got AP {cross.receiver} and AP {local.receiver}"
        )
    return cross.value - local.value


def partition_triplets(num_aps: int) -> list[list[int]]:
    """Consecutive triplets along a stripe; the last one overlaps its predecessor when M mod 3 != 0."""
    if num_aps < 3:
        raise MeasurementError(f"a stripe needs at least 3 APs for triplet calibration, got {num_aps}")
    groups = [list(range(s, s + 3)) for s in range(0, num_aps - 2, 3)]
    if num_aps % 3:
        groups.append(list(range(num_aps - 3, num_aps)))
    return groups


def calibrate_chain(groups: list[list[ClockBias]], sigma_ns: float = 0.0,
                    rng: Optional[np.random.Generator] = None,
                    positions_m: Optional[list] = None,
                    compensate_delay: bool = False,
                    speed_of_light: float = SyncConfig.speed_of_light) -> ChainCalibration:
    """
    Calibrate an ordered chain of triplets relative to the first AP of group 0.

    Group g is linked to g−1 by AP 0 of group g stamping AP 0 of group g−1,
    combined with AP 0 of group g stamping AP 1 of its own group (already
    part of group g's round). ``positions_m`` gives each group's three 1D
    positions; stamps then carry the propagation delay, removed again only
    when ``compensate_delay`` is set.
    """
    if not groups:
        raise MeasurementError("calibrate_chain needs at least one group")
    rng = rng if rng is not None else np.random.default_rng()

    def noise() -> float:
        return rng.normal(0.0, sigma_ns * 1e-9) if sigma_ns > 0 else 0.0

    G = len(groups)
    group_offsets = np.zeros(G)
    ap_offsets = np.zeros((G, 3))
    rounds = []

    for g, group in enumerate(groups):
        delays = None
        if positions_m is not None:
            delays = stripe_delays(positions_m[g], speed_of_light)
        delta = measure_round(group, sigma_ns, rng, delays)
        result = recover(delta, delays if compensate_delay else None)
        rounds.append(result)
        within = result.offsets_from_first()

        if g > 0:
            prev = groups[g - 1]
            flight = 0.0
            if positions_m is not None:
                flight = abs(positions_m[g - 1][0] - positions_m[g][0]) / speed_of_light
            cross = Arrival(prev[0].t - group[0].r + flight + noise(), transmitter=0, receiver=0)
            local = Arrival(delta.delta[1, 0], transmitter=1, receiver=0)
            offset = intergroup_offset(cross, local)          # t_0^{g-1} − t_1^g
            if compensate_delay and delays is not None:
                offset -= flight - delays[1, 0]
            # t_0^g = t_0^{g-1} − offset − (t_1^g − t_0^g)
            group_offsets[g] = group_offsets[g - 1] - offset - within[1]

        ap_offsets[g] = group_offsets[g] + within

    logger.debug(f"Calibrated chain of {G} groups, span {np.ptp(ap_offsets) * 1e9:.3f} ns")
    return ChainCalibration(group_offsets=group_offsets, ap_offsets=ap_offsets, rounds=rounds)


# ── Demo ────────────────────────────────────────────────────────

def random_biases(num_aps: int, rng: np.random.Generator, spread_s: float = 1e-6) -> list[ClockBias]:
    t = rng.uniform(-spread_s, spread_s, num_aps)
    r = rng.uniform(-spread_s, spread_s, num_aps)
    return [ClockBias(float(a), float(b)) for a, b in zip(t, r)]


def sync_demo(num_groups: int, config: Optional[SyncConfig] = None, seed: int = 0) -> list[dict]:
    """
    Calibrate a stripe of 3·N APs and compare each AP's recovered t_i − t_0
    with the truth. Rows: group, ap, true_offset, recovered_offset, error (s).
    """
    config = config or SyncConfig()
    if num_groups < 1:
        raise MeasurementError(f"groups must be >= 1, got {num_groups}")
    rng = np.random.default_rng(seed)
    num_aps = 3 * num_groups
    biases = random_biases(num_aps, rng)
    triplets = partition_triplets(num_aps)
    # zero-delay model unless the known-delay mode is switched on
    positions = None
    if config.compensate_delay:
        positions = [[i * config.ap_spacing_m for i in tri] for tri in triplets]
    chain = calibrate_chain(
        [[biases[i] for i in tri] for tri in triplets],
        sigma_ns=config.sigma_ns, rng=rng, positions_m=positions,
        compensate_delay=config.compensate_delay, speed_of_light=config.speed_of_light,
    )

    rows = []
    t0 = biases[0].t
    for g, tri in enumerate(triplets):
        for slot, ap in enumerate(tri):
            truth = biases[ap].t - t0
            recovered = float(chain.ap_offsets[g, slot])
            rows.append({
                "group": g, "ap": ap, "true_offset": truth,
                "recovered_offset": recovered, "error": recovered - truth,
            })
    worst = max(abs(r["error"]) for r in rows)
    logger.info(f"Sync demo: {num_groups} groups, worst error {worst * 1e9:.3f} ns")
    return rows
