"""
╔══════════════════════════════════════════════════════════════════╗
║  CAMPAIGN: Monte-Carlo Runs over UE Drops                        ║
║                                                                    ║
║  drop i: seed_i = splitmix64(seed, i)                              ║
║    place UEs → β → pilots → γ → policies → closed-form SE         ║
║  drops run in a process pool, aggregated after sorting by index   ║
╚══════════════════════════════════════════════════════════════════╝
"""

import asyncio
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from config.settings import (
    CampaignSpec, GainMode, LoggingConfig, PilotStrategy, PowerControlConfig, PowerPolicy,
    ScenarioConfig, StripeConfig, load_scenario, scenario_to_dict,
)
from core.channel import contamination, estimate_quality, large_scale
from core.errors import CellFreeError, DropError
from core.performance import (
    cdf_summary, channel_gain_experiment, favorable_propagation_stats, se_closed_form, write_cdf_csv,
)
from core.results_logger import ResultsLogger
from core.scenario import Layout, place_aps, place_ues
from core.stripe_bus import stripe_load
from strategies.pilot_assignment import assign_pilots
from strategies.power_control import cdfpt, maxmin, mmf_cqb, select_rpb, weakest_user_diagnostics

logger = logging.getLogger("campaign")

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, index: int) -> int:
    """SplitMix64 mix of (campaign seed, drop index), folded to 63 bits for numpy."""
    z = (seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) >> 1


@dataclass
class DropResult:
    drop: int
    seed: int
    se: dict                                        # policy -> SEResult
    selection: dict = field(default_factory=dict)   # policy -> SelectionReport
    stripe: dict = field(default_factory=dict)      # policy -> StripeLoad
    diagnostics: dict = field(default_factory=dict)


@dataclass
class CampaignReport:
    cdfs: dict                                      # policy -> CdfSummary
    subset_fractions: dict                          # policy -> mean fraction of APs serving a UE
    config_echo: dict
    drops: int
    runtime: dict = field(default_factory=dict)
    stripe_loads: dict = field(default_factory=dict)   # policy -> per-segment served streams, front-haul

    def likely95(self, policy: str) -> float:
        return self.cdfs[policy].likely95

    def to_summary(self, deterministic: bool = True) -> dict:
        policies = {}
        for name, cdf in self.cdfs.items():
            entry = {"likely95": cdf.likely95, "median": cdf.median, "samples": int(cdf.samples.size)}
            if name in self.subset_fractions:
                entry["avg_subset_fraction"] = self.subset_fractions[name]
            if name in self.stripe_loads:
                entry.update(self.stripe_loads[name])
            policies[name] = entry
        summary = {"config": self.config_echo, "drops": self.drops, "policies": policies}
        if not deterministic:
            summary["runtime"] = self.runtime
        return summary


# ── One drop ────────────────────────────────────────────────────

def run_drop(config: ScenarioConfig, seed: int, policies=("cdfpt",),
             pilots: PilotStrategy = PilotStrategy.ORTHOGONAL, alpha_pct: float = 95.0,
             greedy_iters: int = 20, pc_config: Optional[PowerControlConfig] = None,
             drop: int = 0, stripe_config: Optional[StripeConfig] = None) -> DropResult:
    pc_config = pc_config or PowerControlConfig(alpha_pct=alpha_pct)
    stripe_config = stripe_config or StripeConfig()
    ue_seq, shadow_seq, pilot_seq = np.random.SeedSequence(seed).spawn(3)

    layout = Layout(
        ap_positions=place_aps(config),
        ue_positions=place_ues(config, rng=np.random.default_rng(ue_seq)),
    )
    beta = large_scale(layout, config, rng=np.random.default_rng(shadow_seq))
    rho_d, pilot_snr = config.rho_d, config.pilot_snr
    assignment = assign_pilots(
        pilots, beta.beta, layout.ue_positions, config.frame, pilot_snr, rho_d,
        rng_seed=int(pilot_seq.generate_state(1)[0]), iters=greedy_iters, config=config,
    )
    gamma = estimate_quality(beta, assignment.pilot_of, config.frame, pilot_snr).gamma
    c = contamination(assignment.pilot_of)
    b = beta.beta

    result = DropResult(drop=drop, seed=seed, se={}, diagnostics=weakest_user_diagnostics(b))
    mmf_alloc = None
    for name in policies:
        policy = PowerPolicy(name)
        if policy == PowerPolicy.CDFPT:
            alloc = cdfpt(gamma)
        else:
            if mmf_alloc is None:
                mmf_alloc = maxmin(gamma, b, c, rho_d, config=pc_config)
            if policy == PowerPolicy.MMF:
                alloc = mmf_alloc
            elif policy == PowerPolicy.MMF_RPB:
                alloc, report = select_rpb(
                    mmf_alloc, gamma, alpha_pct, b, c, rho_d,
                    reoptimize=pc_config.reoptimize_after_selection, config=pc_config,
                )
                result.selection[name] = report
            else:
                alloc, report = mmf_cqb(
                    gamma, b, c, rho_d, alpha_pct,
                    reoptimize=pc_config.reoptimize_after_selection, base=mmf_alloc, config=pc_config,
                )
                result.selection[name] = report
            if name in result.selection:
                result.stripe[name] = stripe_load(
                    alloc.subsets, config.num_aps, config.bandwidth_hz, stripe_config,
                )
        result.se[name] = se_closed_form(alloc, gamma, b, c, rho_d, config.frame, policy=name, drop=drop)
    return result


def _drop_task(config: ScenarioConfig, spec: CampaignSpec, pc_config: PowerControlConfig,
               drop: int) -> DropResult:
    seed = derive_seed(spec.seed, drop)
    try:
        return run_drop(
            config, seed, spec.policies, spec.pilots, spec.alpha_pct,
            spec.greedy_iters, pc_config, drop,
        )
    except Exception as e:
        raise DropError(f"drop {drop} (seed {seed}) failed: {type(e).__name__}: {e}") from e


# ── Campaign ────────────────────────────────────────────────────

class CampaignRunner:
    def __init__(self, spec: CampaignSpec, pc_config: Optional[PowerControlConfig] = None,
                 log_config: Optional[LoggingConfig] = None,
                 scenario: Optional[ScenarioConfig] = None):
        self.spec = spec.validate()
        self.scenario = scenario if scenario is not None else load_scenario(spec.scenario)
        self.pc_config = pc_config or PowerControlConfig(alpha_pct=spec.alpha_pct)
        self.results = ResultsLogger(log_config or LoggingConfig(), spec.out_dir)

    async def _execute(self) -> list[DropResult]:
        spec = self.spec
        if spec.workers == 1:
            out = []
            for i in range(spec.drops):
                out.append(_drop_task(self.scenario, spec, self.pc_config, i))
                logger.debug(f"Drop {i + 1}/{spec.drops} done")
            return out

        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [
                loop.run_in_executor(pool, _drop_task, self.scenario, spec, self.pc_config, i)
                for i in range(spec.drops)
            ]
            return list(await asyncio.gather(*futures))

    def _aggregate(self, drops: list[DropResult], runtime: dict) -> CampaignReport:
        cdfs, fractions, stripe_loads = {}, {}, {}
        for name in self.spec.policies:
            cdfs[name] = cdf_summary(np.concatenate([d.se[name].per_user_se for d in drops]))
            reports = [d.selection[name] for d in drops if name in d.selection]
            if reports:
                fractions[name] = float(np.mean([r.avg_subset_fraction for r in reports]))
            loads = [d.stripe[name] for d in drops if name in d.stripe]
            if loads:
                stripe_loads[name] = {
                    "avg_served_streams_per_segment": float(np.mean([s.mean_served for s in loads])),
                    "fronthaul_bit_rate": max(s.fronthaul.bit_rate for s in loads),
                }
        echo = {
            "scenario": scenario_to_dict(self.scenario),
            "policies": list(self.spec.policies),
            "pilots": self.spec.pilots.value,
            "alpha_pct": self.spec.alpha_pct,
            "seed": self.spec.seed,
        }
        return CampaignReport(cdfs=cdfs, subset_fractions=fractions, config_echo=echo,
                              drops=len(drops), runtime=runtime, stripe_loads=stripe_loads)

    def _write(self, drops: list[DropResult], report: CampaignReport):
        self.results.reset_drops()
        for d in drops:
            for name, se in d.se.items():
                self.results.log_drop({
                    "drop": d.drop, "seed": d.seed, "policy": name,
                    "se": [float(v) for v in se.per_user_se], "min_se": se.min_se,
                    **d.diagnostics,
                    **({"stripe": d.stripe[name].to_dict()} if name in d.stripe else {}),
                })
        self.results.write_se_csv([
            (d.drop, k, v, name)
            for d in drops for name, se in d.se.items() for k, v in enumerate(se.per_user_se)
        ])
        for name, cdf in report.cdfs.items():
            self.results.write_cdf(name, cdf)
        self.results.save_summary(report.to_summary(self.spec.deterministic))

    async def run(self) -> CampaignReport:
        spec = self.spec
        start = time.time()
        logger.info(
            f"Campaign {self.scenario.name}: {spec.drops} drops, policies={spec.policies}, "
            f"pilots={spec.pilots.value}, workers={spec.workers}"
        )
        self.results.log_event({"event": "campaign_start", "scenario": self.scenario.name,
                                "drops": spec.drops, "policies": list(spec.policies)})
        try:
            drops = await self._execute()
        except CellFreeError as e:
            logger.error(f"Campaign aborted: {e}", exc_info=True)
            self.results.log_event({"event": "campaign_failed", "error": str(e)})
            raise

        drops.sort(key=lambda d: d.drop)
        elapsed = time.time() - start
        report = self._aggregate(drops, {"seconds": round(elapsed, 3), "workers": spec.workers})
        self._write(drops, report)
        self.results.log_event({"event": "campaign_finish", "seconds": elapsed,
                                **{p: report.likely95(p) for p in report.cdfs}})
        for name, cdf in report.cdfs.items():
            extra = f" | subset {report.subset_fractions[name]:.1%}" if name in report.subset_fractions else ""
            logger.info(f"{name:>8}: 95%-likely SE {cdf.likely95:.3f} bit/s/Hz | median {cdf.median:.3f}{extra}")
        return report


def run_campaign(spec: CampaignSpec, pc_config: Optional[PowerControlConfig] = None,
                 log_config: Optional[LoggingConfig] = None,
                 scenario: Optional[ScenarioConfig] = None) -> CampaignReport:
    return asyncio.run(CampaignRunner(spec, pc_config, log_config, scenario).run())


# ── Macro-diversity experiment ──────────────────────────────────

def run_macro_diversity(config: ScenarioConfig, isds, draws: int, pairs: int, seed: int,
             results: ResultsLogger) -> dict:
    """Channel-gain and orthogonality CDFs per inter-site distance, plus percentile summary."""
    summary = {"config": scenario_to_dict(config), "isd": {}}
    for isd in isds:
        gains = channel_gain_experiment(config, isd, draws, seed)
        ortho = favorable_propagation_stats(config, pairs, seed, isd_m=isd)
        tag = f"{isd:g}"
        for mode, cdf in gains.items():
            write_cdf_csv(cdf, str(results.out_dir / f"gain_isd{tag}_{mode}.csv"))
        write_cdf_csv(ortho, str(results.out_dir / f"orthogonality_isd{tag}.csv"))

        cf, cell = gains[GainMode.CELLFREE.value], gains[GainMode.CELLULAR.value]
        summary["isd"][tag] = {
            "gain_db": {
                str(p): {"cellfree": cf.percentile(p), "cellular": cell.percentile(p),
                         "difference": cf.percentile(p) - cell.percentile(p)}
                for p in (5, 50, 95)
            },
            "orthogonality_median": ortho.median,
        }
    results.save_summary(summary, "macro_summary.json")
    return summary
