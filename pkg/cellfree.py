"""
╔══════════════════════════════════════════════════════════════════════════╗
║  CELL-FREE STRIPES: Cell-Free Massive MIMO System Simulator             ║
║                                                                          ║
║  run           DL spectral-efficiency campaign over UE drops             ║
║  fig3, macro   cell-free vs cellular channel gain, favorable propagation ║
║  sync demo     triplet clock calibration along a stripe                  ║
║  stripe verify sequential APU bus vs centralized MR combining            ║
╚══════════════════════════════════════════════════════════════════════════╝
"""

import argparse
import logging
import os
import sys
from pathlib import Path

from dotenv import load_dotenv

from config.settings import (
    CampaignSpec, LoggingConfig, PilotStrategy, PowerControlConfig, PowerPolicy, StripeConfig,
    SyncConfig, load_scenario,
)
from core.campaign import run_campaign, run_macro_diversity
from core.errors import CellFreeError
from core.results_logger import ResultsLogger
from core.stripe_bus import fronthaul_requirement, verify_stripe
from core.sync import sync_demo

logger = logging.getLogger("cellfree")

MMF_DEFAULT_DROPS = 50
DEFAULT_DROPS = 200


def _configure_logging(level: str):
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s [%(name)s] %(levelname)s  %(message)s",
        datefmt="%H:%M:%S",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cellfree", description="Cell-free Massive MIMO simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Monte-Carlo SE campaign")
    run.add_argument("--scenario", default="indoor", help="Preset name or scenario JSON path (default: indoor)")
    run.add_argument("--power-control", nargs="+", default=["cdfpt", "mmf"],
                     choices=[p.value for p in PowerPolicy], help="Policies to evaluate")
    run.add_argument("--pilots", default=PilotStrategy.ORTHOGONAL.value,
                     choices=[p.value for p in PilotStrategy])
    run.add_argument("--alpha", type=float, default=95.0, help="AP-selection threshold in percent (default: 95)")
    run.add_argument("--drops", type=int, default=None,
                     help=f"UE drops (default: {MMF_DEFAULT_DROPS} with MMF, else {DEFAULT_DROPS})")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default=None, help="Output directory (default: $CELLFREE_OUT_DIR or results)")
    run.add_argument("--workers", type=int, default=None, help="Worker processes (default: $CELLFREE_WORKERS or 1)")
    run.add_argument("--greedy-iters", type=int, default=20)
    run.add_argument("--no-reoptimize", action="store_true", help="Keep MMF powers on the selected subsets")
    run.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True,
                     help="Omit wall-clock runtime from summary.json (default: on)")

    macro = sub.add_parser("fig3", aliases=["macro"], help="Macro-diversity and favorable-propagation CDFs")
    macro.add_argument("--scenario", default="macro")
    macro.add_argument("--isd", type=float, nargs="+", default=[5.0, 100.0], help="Inter-site distances in m")
    macro.add_argument("--draws", type=int, default=10_000)
    macro.add_argument("--pairs", type=int, default=10_000)
    macro.add_argument("--seed", type=int, default=0)
    macro.add_argument("--out", default=None)

    sync = sub.add_parser("sync", help="Clock-bias calibration")
    sync_sub = sync.add_subparsers(dest="action", required=True)
    demo = sync_sub.add_parser("demo", help="Calibrate a random stripe of AP triplets")
    demo.add_argument("--groups", type=int, default=10)
    demo.add_argument("--sigma-ns", type=float, default=0.0)
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--compensate-delay", action="store_true",
                      help="Model inter-AP propagation delay and subtract it before recovery")

    stripe = sub.add_parser("stripe", help="Radio-stripe bus checks")
    stripe_sub = stripe.add_subparsers(dest="action", required=True)
    verify = stripe_sub.add_parser("verify", help="Sequential bus vs centralized MR combining")
    verify.add_argument("--aps", type=int, default=50)
    verify.add_argument("--ues", type=int, default=8)
    verify.add_argument("--frames", type=int, default=100)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--bandwidth", type=float, default=20e6, help="Bandwidth for front-haul sizing (Hz)")
    return parser


def _cmd_run(args) -> int:
    policies = list(dict.fromkeys(args.power_control))
    uses_mmf = any(p != PowerPolicy.CDFPT.value for p in policies)
    drops = args.drops if args.drops is not None else (MMF_DEFAULT_DROPS if uses_mmf else DEFAULT_DROPS)

    spec = CampaignSpec(
        scenario=args.scenario,
        policies=policies,
        pilots=PilotStrategy(args.pilots),
        alpha_pct=args.alpha,
        drops=drops,
        seed=args.seed,
        greedy_iters=args.greedy_iters,
        deterministic=args.deterministic,
    )
    if args.out:
        spec.out_dir = args.out
    if args.workers is not None:
        spec.workers = args.workers

    pc_config = PowerControlConfig(alpha_pct=args.alpha, reoptimize_after_selection=not args.no_reoptimize)
    report = run_campaign(spec, pc_config)

    print()
    print("=" * 60)
    print(f"  {report.config_echo['scenario']['name']}: {report.drops} drops, pilots={spec.pilots.value}")
    for name, cdf in report.cdfs.items():
        frac = report.subset_fractions.get(name)
        extra = f"  APs/UE {frac:.1%}" if frac is not None else ""
        print(f"  {name:>8}  95%-likely {cdf.likely95:6.3f}  median {cdf.median:6.3f} bit/s/Hz{extra}")
    print(f"  Output: {Path(spec.out_dir).resolve()}")
    print("=" * 60)
    return 0


def _cmd_macro(args) -> int:
    config = load_scenario(args.scenario)
    results = ResultsLogger(LoggingConfig(), args.out)
    summary = run_macro_diversity(config, args.isd, args.draws, args.pairs, args.seed, results)
    for isd, entry in summary["isd"].items():
        diffs = "  ".join(f"p{p}: {v['difference']:+.1f} dB" for p, v in entry["gain_db"].items())
        print(f"ISD {isd:>5} m | cell-free minus cellular {diffs} | "
              f"median orthogonality {entry['orthogonality_median']:.4f}")
    return 0


def _cmd_sync(args) -> int:
    config = SyncConfig(sigma_ns=args.sigma_ns, compensate_delay=args.compensate_delay)
    rows = sync_demo(args.groups, config, args.seed)
    print(f"{'group':>5} {'ap':>4} {'true_offset':>16} {'recovered_offset':>18} {'error':>12}")
    for r in rows:
        print(f"{r['group']:>5} {r['ap']:>4} {r['true_offset']:>16.9e} "
              f"{r['recovered_offset']:>18.9e} {r['error']:>12.3e}")
    return 0


def _cmd_stripe(args) -> int:
    residual = verify_stripe(args.aps, args.ues, args.frames, args.seed)
    fh = fronthaul_requirement([args.ues], args.bandwidth, StripeConfig())
    print(f"Oracle residual (sequential vs centralized): {residual:.3e}")
    print(f"Front-haul at full load: {fh.streams} streams, {fh.bit_rate / 1e9:.3f} Gbit/s")
    return 0


def main(argv=None) -> int:
    load_dotenv()
    _configure_logging(os.getenv("CELLFREE_LOG_LEVEL", "INFO"))
    args = _build_parser().parse_args(argv)

    handlers = {
        "run": _cmd_run, "fig3": _cmd_macro, "macro": _cmd_macro,
        "sync": _cmd_sync, "stripe": _cmd_stripe,
    }
    try:
        return handlers[args.command](args)
    except CellFreeError as e:
        logger.error(f"{args.command} failed: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
