"""
╔══════════════════════════════════════════════════════════════════╗
║  PILOT ASSIGNMENT: Random, Greedy, Brute-Force, Structured       ║
║                                                                    ║
║  τ_up mutually orthogonal pilots, stored as indices only:         ║
║  |φ_k^H φ_k'|² ∈ {0, 1}, which is all the closed form consumes.   ║
║  Ties break towards the lowest pilot index everywhere.             ║
╚══════════════════════════════════════════════════════════════════╝
"""

import csv
import itertools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from config.settings import FrameConfig, PilotStrategy, Utility
from core.channel import LargeScaleMatrix, contamination, estimate_quality
from core.errors import InstanceTooLargeError
from core.scenario import distance, prelog
from strategies.power_control import cdfpt, dl_sinr

logger = logging.getLogger("pilots")

BRUTEFORCE_LIMIT = 10 ** 6


@dataclass
class PilotAssignment:
    pilot_of: np.ndarray    # (K,) indices in [0, tau_up)
    tau_up: int

    def __post_init__(self):
        self.pilot_of = np.asarray(self.pilot_of, dtype=int)
        if np.any(self.pilot_of < 0) or np.any(self.pilot_of >= self.tau_up):
            raise ValueError(f"pilot indices must lie in [0, {self.tau_up})")

    @property
    def contamination(self) -> np.ndarray:
        return contamination(self.pilot_of)

    @property
    def is_injective(self) -> bool:
        return len(np.unique(self.pilot_of)) == self.pilot_of.size


def _cdfpt_se(beta: np.ndarray, pilot_of: np.ndarray, frame: FrameConfig,
              pilot_snr: float, rho_d: float) -> np.ndarray:
    gamma = estimate_quality(LargeScaleMatrix(beta), pilot_of, frame, pilot_snr).gamma
    sinr = dl_sinr(cdfpt(gamma).rho, gamma, beta, contamination(pilot_of), rho_d)
    return prelog(frame) * np.log2(1.0 + sinr)


def assign_orthogonal(K: int, tau_up: int) -> PilotAssignment:
    """UE k gets pilot k mod τ_up; injective when τ_up ≥ K."""
    return PilotAssignment(np.arange(K) % tau_up, tau_up)


def assign_random(K: int, tau_up: int, rng_seed: Optional[int] = None) -> PilotAssignment:
    if tau_up < 1:
        raise ValueError(f"tau_up must be >= 1, got {tau_up}")
    rng = np.random.default_rng(rng_seed)
    return PilotAssignment(rng.integers(0, tau_up, K), tau_up)


def _greedy_moves(pilot_of: np.ndarray, se: np.ndarray, gain: np.ndarray, tau_up: int):
    """Candidate (ue, pilot) moves in trial order.

    The worst UE goes first, towards the pilot whose other users carry the
    least total large-scale gain, then to every other pilot. After that each
    UE sharing its pilot tries every unused pilot, weakest UE first.
    """
    K = pilot_of.size
    worst = int(np.argmin(se))
    others = np.arange(K) != worst
    load = np.bincount(pilot_of[others], weights=gain[others], minlength=tau_up)
    for p in np.argsort(load, kind="stable"):
        if p != pilot_of[worst]:
            yield worst, int(p)

    counts = np.bincount(pilot_of, minlength=tau_up)
    free = np.flatnonzero(counts == 0)
    for k in np.argsort(se, kind="stable"):
        if counts[pilot_of[k]] > 1:
            for p in free:
                yield int(k), int(p)


def assign_greedy(beta, K: int, tau_up: int, frame: FrameConfig, pilot_snr: float,
                  iters: int, rho_d: float, rng_seed: Optional[int] = None,
                  initial: Optional[PilotAssignment] = None) -> PilotAssignment:
    """
    Random start, then single-UE pilot changes that raise the minimum CD-FPT SE.

    Each iteration keeps the first candidate from ``_greedy_moves`` that
    strictly improves the minimum SE; a change that leaves the minimum equal
    is kept when it removes a collision. The search stops when no candidate
    qualifies or after ``iters`` iterations.
    """
    if iters < 0:
        raise ValueError(f"iters must be >= 0, got {iters}")
    beta = np.asarray(beta)
    current = initial if initial is not None else assign_random(K, tau_up, rng_seed)
    pilot_of = current.pilot_of.copy()
    se = _cdfpt_se(beta, pilot_of, frame, pilot_snr, rho_d)
    gain = beta.sum(axis=0)

    for it in range(iters):
        collisions = K - len(np.unique(pilot_of))
        accepted = None
        for ue, pilot in _greedy_moves(pilot_of, se, gain, tau_up):
            candidate = pilot_of.copy()
            candidate[ue] = pilot
            candidate_se = _cdfpt_se(beta, candidate, frame, pilot_snr, rho_d)
            fewer = K - len(np.unique(candidate)) < collisions
            if candidate_se.min() > se.min() or (fewer and candidate_se.min() == se.min()):
                accepted = ue, pilot, candidate, candidate_se
                break
        if accepted is None:
            break
        ue, pilot, pilot_of, se = accepted
        logger.debug(f"Greedy iter {it}: UE {ue} -> pilot {pilot}, min SE {se.min():.3f}")

    return PilotAssignment(pilot_of, tau_up)


def assign_bruteforce(beta, K: int, tau_up: int, frame: FrameConfig, pilot_snr: float,
                      utility: Utility, rho_d: float) -> PilotAssignment:
    """Exhaustive argmax of the CD-FPT utility; first (lexicographically lowest) maximizer wins."""
    if tau_up ** K > BRUTEFORCE_LIMIT:
        raise InstanceTooLargeError(
            f"Brute-force search over {tau_up}^{K} assignments exceeds {BRUTEFORCE_LIMIT}"
        )
    beta = np.asarray(beta)
    best, best_value = None, -np.inf
    for combo in itertools.product(range(tau_up), repeat=K):
        se = _cdfpt_se(beta, np.array(combo), frame, pilot_snr, rho_d)
        value = se.min() if utility == Utility.MAX_MIN else se.sum()
        if value > best_value:
            best, best_value = combo, value
    logger.info(f"Brute-force pilots ({utility.value}): utility {best_value:.4f}")
    return PilotAssignment(np.array(best), tau_up)


def assign_structured(ue_positions, K: int, tau_up: int, config=None) -> PilotAssignment:
    """
    Greedy spatial coloring: each UE in index order takes the pilot whose
    current users are farthest from it (empty pilots count as infinitely far).
    """
    if tau_up < 1:
        raise ValueError(f"tau_up must be >= 1, got {tau_up}")

    pos = np.asarray(ue_positions)
    pilot_of = np.zeros(K, dtype=int)
    for k in range(K):
        score = np.full(tau_up, np.inf)
        if k > 0:
            d = distance(pos[:k], pos[k], config) if config is not None \
                else np.linalg.norm(pos[:k] - pos[k], axis=-1)
            for p in range(tau_up):
                on_p = pilot_of[:k] == p
                if on_p.any():
                    score[p] = d[on_p].min()
        pilot_of[k] = int(np.argmax(score))
    return PilotAssignment(pilot_of, tau_up)


def assign_pilots(strategy: PilotStrategy, beta, ue_positions, frame: FrameConfig,
                  pilot_snr: float, rho_d: float, rng_seed: Optional[int] = None,
                  iters: int = 20, config=None) -> PilotAssignment:
    beta = np.asarray(beta)
    K, tau_up = beta.shape[1], frame.tau_up
    if strategy == PilotStrategy.ORTHOGONAL:
        return assign_orthogonal(K, tau_up)
    if strategy == PilotStrategy.RANDOM:
        return assign_random(K, tau_up, rng_seed)
    if strategy == PilotStrategy.GREEDY:
        return assign_greedy(beta, K, tau_up, frame, pilot_snr, iters, rho_d, rng_seed)
    if strategy == PilotStrategy.BRUTEFORCE:
        return assign_bruteforce(beta, K, tau_up, frame, pilot_snr, Utility.MAX_MIN, rho_d)
    return assign_structured(ue_positions, K, tau_up, config)


def export_assignment_csv(assignment: PilotAssignment, path: str):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["ue_id", "pilot_id"])
        for k, p in enumerate(assignment.pilot_of):
            writer.writerow([k, int(p)])
