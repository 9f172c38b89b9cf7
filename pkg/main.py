"""
Command-line entry point for Pseudoinverse GCN experiments.
"""
import argparse
import logging
import sys
from typing import List, Optional

from pinvgcn import __version__
from pinvgcn.bench import (
    cmd_analyze_weights,
    cmd_eigs,
    cmd_filter_response,
    cmd_info,
    cmd_make_cloud,
    cmd_oracle_check,
    cmd_sweep_rank,
    cmd_sweep_split,
    cmd_train,
)
from pinvgcn.config import Settings, load_experiment
from pinvgcn.errors import PinvGCNError
from pinvgcn.oracle_check import DEFAULT_SCALE

logger = logging.getLogger("pinvgcn")


def experiment_from_args(args: argparse.Namespace, settings: Settings):
    """Experiment file plus command-line overrides."""
    overrides = {
        "rank": getattr(args, "rank", None),
        "runs": getattr(args, "runs", None),
        "seed": getattr(args, "seed", None),
        "per_class": getattr(args, "per_class", None) if args.command == "train" else None,
        "out": getattr(args, "out", None) if args.command == "train" else None,
        "threads": getattr(args, "threads", None),
        "tie_high_pass": True if getattr(args, "tie_high_pass", False) else None,
        "timings": False if getattr(args, "no_timings", False) else None,
    }
    return load_experiment(args.config, overrides, settings)


def run_eigs(args, settings) -> int:
    print("\n=== Spectral Basis ===")
    summary = cmd_eigs(experiment_from_args(args, settings))
    source = "loaded from cache" if summary.cached else "computed"
    print(f"n={summary.n}, r={summary.r} ({source} in {summary.seconds:.2f} s)")
    print(f"Eigengap lambda_1 = {summary.eigengap:.6f}")
    print(f"lambda_r = {summary.lambdas[-1]:.6f}, max residual {summary.max_residual:.2e}")
    print(f"Basis file: {summary.path}")
    return 0


def run_train(args, settings) -> int:
    config = experiment_from_args(args, settings)
    print(f"\n=== Training: {config.dataset.name}, r={config.rank} ===")
    summary = cmd_train(config)
    print(f"Completed {summary.completed}/{summary.runs} runs"
          + (" (PARTIAL)" if summary.partial else ""))
    if summary.accuracy_mean is not None:
        sd = f" (+- {100 * summary.accuracy_sd:.2f})" if summary.accuracy_sd is not None else ""
        print(f"Accuracy: {100 * summary.accuracy_mean:.2f} %{sd}")
        print(f"Runtime per run: {summary.total_s:.2f} s "
              f"(setup {summary.setup_s:.2f}, train {summary.train_s:.2f}, eval {summary.eval_s:.2f})")
        print("Weight magnitudes mu_1..3: " + ", ".join(f"{x:.4f}" for x in summary.mu_mean))
    print(f"Results: {config.output}")
    return 0 if summary.completed else 1


def run_sweep(args, settings) -> int:
    config = experiment_from_args(args, settings)
    ranks = [int(r) for r in args.ranks.split(",") if r.strip()]
    print(f"\n=== Rank Sweep: {config.dataset.name} ===")
    rows = cmd_sweep_rank(config, ranks, args.out)
    for row in rows:
        miscls = "failed" if row.miscls_mean is None else f"{100 * row.miscls_mean:.2f} %"
        print(f"  r={row.rank:5d}  misclassification {miscls}  "
              f"setup {row.setup_s:.2f} s  train {row.train_s:.2f} s")
    print(f"Sweep CSV: {args.out}")
    return 0


def run_sweep_split(args, settings) -> int:
    config = experiment_from_args(args, settings)
    sizes = [int(k) for k in args.per_class.split(",") if k.strip()]
    print(f"\n=== Split Sweep: {config.dataset.name}, r={config.rank} ===")
    rows = cmd_sweep_split(config, sizes, args.out)
    for row in rows:
        miscls = "failed" if row.miscls_mean is None else f"{100 * row.miscls_mean:.2f} %"
        print(f"  {row.per_class:5d} per class  misclassification {miscls}  "
              f"train {row.train_s:.2f} s")
    print(f"Sweep CSV: {args.out}")
    return 0


def run_analyze(args, settings) -> int:
    print("\n=== Weight Magnitudes ===")
    for s in cmd_analyze_weights(args.paths, args.out):
        print(f"  {s.dataset}: mu_1={s.mu1:.4f}  mu_2={s.mu2:.4f}  mu_3={s.mu3:.4f}  ({s.runs} runs)")
    return 0


def run_oracle(args, settings) -> int:
    print("\n=== Oracle Check ===")
    reports, passed = cmd_oracle_check(args.scale, args.seed, args.perturb)
    for report in reports:
        if report.status == "skipped":
            print(f"  {report.name:22s} SKIPPED ({report.detail})")
        else:
            print(f"  {report.name:22s} {report.status.upper():5s} "
                  f"error {report.max_error:.2e} <= {report.tolerance:.0e}  [{report.detail}]")
    return 0 if passed else 1


def run_info(args, settings) -> int:
    info = cmd_info(experiment_from_args(args, settings))
    print(f"\n=== Dataset: {info.name} ===")
    for key, value in info.model_dump().items():
        if value is not None and key != "name":
            print(f"  {key}: {value}")
    return 0


def run_make_cloud(args, settings) -> int:
    cmd_make_cloud(args.out, args.n, args.separation, args.spread, args.seed)
    print(f"Wrote {args.n} points to {args.out}")
    return 0


def run_filter_response(args, settings) -> int:
    config = experiment_from_args(args, settings)
    cmd_filter_response(config, args.out, args.alpha, args.beta, args.gamma, args.points)
    print(f"Filter response written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pinvgcn", description="Pseudoinverse GCN experiments on graphs and hypergraphs."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Logging level (default PINVGCN_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    experiment = argparse.ArgumentParser(add_help=False)
    experiment.add_argument("--config", required=True, help="Experiment file (INI)")
    experiment.add_argument("--rank", type=int, help="Approximation rank r")
    experiment.add_argument("--threads", type=int, help="Worker threads")

    runs = argparse.ArgumentParser(add_help=False)
    runs.add_argument("--runs", type=int, help="Number of runs")
    runs.add_argument("--seed", type=int, help="Base seed (run j uses seed + j)")
    runs.add_argument("--tie-high-pass", action="store_true",
                      help="Keep high-pass weights equal to pseudoinverse weights")
    runs.add_argument("--no-timings", action="store_true", help="Write zero phase times")

    p = sub.add_parser("eigs", parents=[experiment], help="Compute and cache the spectral basis")
    p.set_defaults(handler=run_eigs)

    p = sub.add_parser("train", parents=[experiment, runs], help="Train and evaluate all runs")
    p.add_argument("--out", help="Results file (JSON lines)")
    p.add_argument("--per-class", type=int, help="Training samples per class")
    p.set_defaults(handler=run_train)

    p = sub.add_parser("sweep-rank", parents=[experiment, runs], help="Train over a list of ranks")
    p.add_argument("--ranks", required=True, help="Comma-separated ranks, e.g. 10,20,50")
    p.add_argument("--out", required=True, help="Sweep CSV")
    p.set_defaults(handler=run_sweep)

    p = sub.add_parser("sweep-split", parents=[experiment, runs],
                       help="Train over a list of per-class training-set sizes")
    p.add_argument("--per-class", required=True, help="Comma-separated sizes, e.g. 1,5,10,20")
    p.add_argument("--out", required=True, help="Sweep CSV")
    p.set_defaults(handler=run_sweep_split)

    p = sub.add_parser("analyze-weights", help="Average weight magnitudes per filter part")
    p.add_argument("paths", nargs="+", help="Results files or checkpoint directories")
    p.add_argument("--out", help="Optional CSV")
    p.set_defaults(handler=run_analyze)

    p = sub.add_parser("oracle-check", help="Compare fast paths against dense oracles")
    p.add_argument("--scale", type=int, default=DEFAULT_SCALE, help="Maximum instance size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perturb", type=float, default=0.0, help="Self-test: offset added to fast results")
    p.set_defaults(handler=run_oracle)

    p = sub.add_parser("info", parents=[experiment], help="Dataset information")
    p.set_defaults(handler=run_info)

    p = sub.add_parser("make-cloud", help="Write a synthetic two-cluster point cloud")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--separation", type=float, default=10.0)
    p.add_argument("--spread", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=run_make_cloud)

    p = sub.add_parser("filter-response", parents=[experiment], help="Write a filter response curve")
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--points", type=int, default=401)
    p.set_defaults(handler=run_filter_response)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main function."""
    args = build_parser().parse_args(argv)
    try:
        settings = Settings.from_env()
    except PinvGCNError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args, settings)
    except PinvGCNError as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"\nERROR: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
