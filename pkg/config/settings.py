"""
╔══════════════════════════════════════════════════════════════════════╗
║  CELL-FREE STRIPES: CONFIGURATION                                   ║
║  Scenario geometry, TDD frame, channel, power control, sync, bus    ║
╚══════════════════════════════════════════════════════════════════════╝
"""

import json
import math
import os
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from core.errors import ConfigError

PRESET_DIR = Path(__file__).parent / "presets"


class Deployment(Enum):
    GRID = "grid"
    PERIMETER = "perimeter"


class PathLossModel(Enum):
    ONE_SLOPE = "one_slope"
    THREE_SLOPE = "three_slope"


class PowerPolicy(Enum):
    CDFPT = "cdfpt"
    MMF = "mmf"
    MMF_RPB = "mmf-rpb"
    MMF_CQB = "mmf-cqb"


class PilotStrategy(Enum):
    ORTHOGONAL = "orthogonal"
    RANDOM = "random"
    GREEDY = "greedy"
    BRUTEFORCE = "bruteforce"
    STRUCTURED = "structured"


class Utility(Enum):
    MAX_MIN = "max_min"
    SUM = "sum"


class GainMode(Enum):
    CELLFREE = "cellfree"
    CELLULAR = "cellular"


@dataclass
class OneSlopeParams:
    d0_m: float = 15.0
    pl_d0_db: float = 70.28
    exponent_n: float = 2.59
    shadow_sigma_db: float = 6.09


@dataclass
class ThreeSlopeParams:
    d0_m: float = 10.0
    d1_m: float = 50.0
    L_const_db: float = 140.7151   # Hata-COST231, 1.9 GHz, h_AP=15 m, h_UE=1.65 m
    shadow_sigma_db: float = 8.0   # applied beyond d1 only


@dataclass
class PathLossParams:
    model: PathLossModel = PathLossModel.ONE_SLOPE
    one_slope: OneSlopeParams = field(default_factory=OneSlopeParams)
    three_slope: ThreeSlopeParams = field(default_factory=ThreeSlopeParams)
    min_distance_m: float = 1.0

    def validate(self):
        if self.model == PathLossModel.ONE_SLOPE:
            p = self.one_slope
            if p.d0_m <= 0:
                raise ConfigError(f"pathloss.one_slope.d0_m must be > 0, got {p.d0_m}")
            if p.exponent_n <= 0:
                raise ConfigError(f"pathloss.one_slope.exponent_n must be > 0, got {p.exponent_n}")
            if p.shadow_sigma_db < 0:
                raise ConfigError(f"pathloss.one_slope.shadow_sigma_db must be >= 0, got {p.shadow_sigma_db}")
        else:
            p = self.three_slope
            if not 0 < p.d0_m < p.d1_m:
                raise ConfigError(f"pathloss.three_slope needs 0 < d0 < d1, got d0={p.d0_m} d1={p.d1_m}")
            if p.shadow_sigma_db < 0:
                raise ConfigError(f"pathloss.three_slope.shadow_sigma_db must be >= 0, got {p.shadow_sigma_db}")
        if self.min_distance_m <= 0:
            raise ConfigError(f"pathloss.min_distance_m must be > 0, got {self.min_distance_m}")


@dataclass
class FrameConfig:
    """TDD frame in samples: UL pilots, UL data, DL pilots, DL data."""
    tau: int = 200
    tau_up: int = 20
    tau_ud: int = 0
    tau_dp: int = 0
    tau_dd: int = 180

    def validate(self):
        parts = {"tau_up": self.tau_up, "tau_ud": self.tau_ud, "tau_dp": self.tau_dp, "tau_dd": self.tau_dd}
        for name, value in parts.items():
            if value < 0:
                raise ConfigError(f"frame.{name} must be >= 0, got {value}")
        if self.tau_up < 1:
            raise ConfigError(f"frame.tau_up must be >= 1, got {self.tau_up}")
        if sum(parts.values()) != self.tau:
            raise ConfigError(
                f"frame partition {sum(parts.values())} != tau {self.tau} "
                f"(up={self.tau_up} ud={self.tau_ud} dp={self.tau_dp} dd={self.tau_dd})"
            )


@dataclass
class ScenarioConfig:
    name: str = "custom"
    area_width_m: float = 100.0
    area_height_m: float = 100.0
    deployment: Deployment = Deployment.GRID
    num_aps: int = 400
    num_ues: int = 20
    ap_height_m: float = 6.0
    ue_height_m: float = 2.0
    wrap_around: bool = True
    carrier_freq_hz: float = 5.2e9
    bandwidth_hz: float = 20e6
    max_ap_power_w: float = 0.2
    pilot_power_w: float = 0.1
    noise_figure_db: float = 9.0
    pathloss: PathLossParams = field(default_factory=PathLossParams)
    frame: FrameConfig = field(default_factory=FrameConfig)

    # ── Derived link budget ─────────────────────────────────────

    @property
    def noise_power_w(self) -> float:
        from core.channel import noise_power_w
        return noise_power_w(self.bandwidth_hz, self.noise_figure_db)

    @property
    def rho_d(self) -> float:
        """Normalized DL SNR: max per-AP power over noise power."""
        return self.max_ap_power_w / self.noise_power_w

    @property
    def pilot_snr(self) -> float:
        return self.pilot_power_w / self.noise_power_w

    def validate(self) -> "ScenarioConfig":
        if self.num_aps < 1:
            raise ConfigError(f"num_aps must be >= 1, got {self.num_aps}")
        if self.num_ues < 1:
            raise ConfigError(f"num_ues must be >= 1, got {self.num_ues}")
        if self.area_width_m < 0 or self.area_height_m < 0:
            raise ConfigError(f"area must be non-negative, got {self.area_width_m}x{self.area_height_m}")
        for name in ("max_ap_power_w", "pilot_power_w", "bandwidth_hz", "carrier_freq_hz"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.deployment == Deployment.GRID and math.isqrt(self.num_aps) ** 2 != self.num_aps:
            raise ConfigError(f"grid deployment needs a perfect-square num_aps, got {self.num_aps}")
        if self.deployment == Deployment.PERIMETER and self.num_aps % 4 != 0:
            raise ConfigError(f"perimeter deployment needs num_aps divisible by 4, got {self.num_aps}")
        self.pathloss.validate()
        self.frame.validate()
        return self


@dataclass
class PowerControlConfig:
    alpha_pct: float = 95.0
    bisection_tol: float = 1e-3       # relative
    feasibility_margin: float = 1e-6
    max_bisection_iters: int = 60
    reoptimize_after_selection: bool = True
    solver: Optional[str] = None      # cvxpy default when None
    fallback_solver: Optional[str] = "SCS"


@dataclass
class SyncConfig:
    sigma_ns: float = 0.0
    compensate_delay: bool = False
    ap_spacing_m: float = 5.0
    speed_of_light: float = 299_792_458.0


@dataclass
class StripeConfig:
    bits_per_sample: int = 32         # 2 x 16-bit fixed point
    aps_per_stripe: int = 20


@dataclass
class LoggingConfig:
    out_dir: str = field(default_factory=lambda: os.getenv("CELLFREE_OUT_DIR", "results"))
    drops_log_file: str = "drops.jsonl"
    events_log_file: str = "events.jsonl"
    summary_file: str = "summary.json"
    level: str = field(default_factory=lambda: os.getenv("CELLFREE_LOG_LEVEL", "INFO"))


@dataclass
class CampaignSpec:
    scenario: str = "indoor"          # preset name or JSON path
    policies: list = field(default_factory=lambda: ["cdfpt", "mmf"])
    pilots: PilotStrategy = PilotStrategy.ORTHOGONAL
    alpha_pct: float = 95.0
    drops: int = 200
    seed: int = 0
    out_dir: str = field(default_factory=lambda: os.getenv("CELLFREE_OUT_DIR", "results"))
    workers: int = field(default_factory=lambda: int(os.getenv("CELLFREE_WORKERS", "1")))
    greedy_iters: int = 20
    deterministic: bool = True        # omit wall-clock runtime from summary.json

    def validate(self) -> "CampaignSpec":
        if self.drops < 1:
            raise ConfigError(f"drops must be >= 1, got {self.drops}")
        known = {p.value for p in PowerPolicy}
        unknown = [p for p in self.policies if p not in known]
        if unknown:
            raise ConfigError(f"unknown policies {unknown}; expected a subset of {sorted(known)}")
        if not 0 < self.alpha_pct <= 100:
            raise ConfigError(f"alpha must be in (0, 100], got {self.alpha_pct}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        return self


# ── JSON (de)serialization ──────────────────────────────────────

def _encode(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {k: _encode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_encode(v) for v in value]
    return value


def scenario_to_dict(config: ScenarioConfig) -> dict:
    return _encode(asdict(config))


def scenario_from_dict(data: dict) -> ScenarioConfig:
    data = dict(data)
    try:
        pl = dict(data.pop("pathloss", {}))
        pathloss = PathLossParams(
            model=PathLossModel(pl.get("model", PathLossModel.ONE_SLOPE.value)),
            one_slope=OneSlopeParams(**pl.get("one_slope", {})),
            three_slope=ThreeSlopeParams(**pl.get("three_slope", {})),
            min_distance_m=pl.get("min_distance_m", 1.0),
        )
        frame = FrameConfig(**data.pop("frame", {}))
        if "deployment" in data:
            data["deployment"] = Deployment(data["deployment"])
        config = ScenarioConfig(pathloss=pathloss, frame=frame, **data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid scenario document: {e}") from e
    return config.validate()


def load_scenario(name_or_path: str) -> ScenarioConfig:
    """Resolve a preset name (indoor, piazza, macro) or read a JSON file."""
    path = PRESET_DIR / f"{name_or_path}.json"
    if not path.exists():
        path = Path(name_or_path)
    if not path.exists():
        raise ConfigError(f"No preset or config file named {name_or_path!r}")
    with open(path) as f:
        return scenario_from_dict(json.load(f))


def dump_scenario(config: ScenarioConfig, path: str):
    with open(path, "w") as f:
        json.dump(scenario_to_dict(config), f, indent=2, sort_keys=True)
