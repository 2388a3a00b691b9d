"""
╔══════════════════════════════════════════════════════════════════╗
║  SCENARIO MODEL: AP Deployment, UE Drops, TDD Frame              ║
║                                                                    ║
║  grid:      √L × √L lattice, first AP half a spacing from walls   ║
║  perimeter: L/4 equally spaced APs on each side of the square     ║
║  distance:  3D, optional torus (wrap-around) in the horizontal    ║
╚══════════════════════════════════════════════════════════════════╝
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from config.settings import Deployment, FrameConfig, ScenarioConfig

logger = logging.getLogger("scenario")


@dataclass
class Layout:
    ap_positions: np.ndarray   # (L, 3) meters
    ue_positions: np.ndarray   # (K, 3) meters

    @property
    def num_aps(self) -> int:
        return self.ap_positions.shape[0]

    @property
    def num_ues(self) -> int:
        return self.ue_positions.shape[0]


def place_aps(config: ScenarioConfig) -> np.ndarray:
    """AP coordinates (L, 3) for the configured deployment."""
    config.validate()
    L = config.num_aps
    W, H = config.area_width_m, config.area_height_m

    if config.deployment == Deployment.GRID:
        side = math.isqrt(L)
        sx, sy = W / side, H / side
        xs = sx / 2 + sx * np.arange(side)
        ys = sy / 2 + sy * np.arange(side)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        xy = np.column_stack([gx.ravel(), gy.ravel()])
    else:
        n = L // 4
        step = np.arange(n) / n
        bottom = np.column_stack([step * W, np.zeros(n)])
        right = np.column_stack([np.full(n, W), step * H])
        top = np.column_stack([W - step * W, np.full(n, H)])
        left = np.column_stack([np.zeros(n), H - step * H])
        xy = np.vstack([bottom, right, top, left])

    aps = np.column_stack([xy, np.full(L, config.ap_height_m)])
    logger.debug(f"Placed {L} APs ({config.deployment.value}) over {W:g}x{H:g} m")
    return aps


def place_ues(config: ScenarioConfig, rng_seed: Optional[int] = None,
              rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """K UEs i.i.d. uniform over the area, deterministic in the seed."""
    rng = rng if rng is not None else np.random.default_rng(rng_seed)
    K = config.num_ues
    x = rng.uniform(0.0, config.area_width_m, K)
    y = rng.uniform(0.0, config.area_height_m, K)
    return np.column_stack([x, y, np.full(K, config.ue_height_m)])


def build_layout(config: ScenarioConfig, rng_seed: Optional[int] = None,
                 rng: Optional[np.random.Generator] = None) -> Layout:
    return Layout(ap_positions=place_aps(config), ue_positions=place_ues(config, rng_seed, rng))


def distance(p1, p2, config: ScenarioConfig):
    """3D distance; the horizontal part is the torus metric when wrap_around is on.

    Broadcasts over leading axes, so arrays of points give arrays of distances.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    dx = np.abs(p1[..., 0] - p2[..., 0])
    dy = np.abs(p1[..., 1] - p2[..., 1])
    if config.wrap_around:
        # min over the 9 shifted copies reduces to this for points inside the area
        dx = np.minimum(dx, config.area_width_m - dx)
        dy = np.minimum(dy, config.area_height_m - dy)
    if p1.shape[-1] > 2 and p2.shape[-1] > 2:
        dz = np.abs(p1[..., 2] - p2[..., 2])
    else:
        dz = 0.0
    return np.sqrt(dx ** 2 + dy ** 2 + dz ** 2)


def pairwise_distances(layout: Layout, config: ScenarioConfig) -> np.ndarray:
    """(L, K) AP-to-UE distance matrix."""
    return distance(layout.ap_positions[:, None, :], layout.ue_positions[None, :, :], config)


def prelog(frame: FrameConfig) -> float:
    """Fraction of the frame left after UL pilots."""
    return 1.0 - frame.tau_up / frame.tau
