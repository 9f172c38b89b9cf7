"""
Benchmark commands: eigensolve caching, multi-run training, rank and split sweeps,
weight analysis and dataset information.

Every command takes a validated ExperimentConfig (or plain arguments) and
returns pydantic records; writing files is done here, printing is left to
the command line.
"""
import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from pinvgcn.csv_handler import CSVHandler
from pinvgcn.data_loader import (
    DataLoader,
    Dataset,
    dataset_info,
    make_two_cluster_cloud,
    run_generator,
    sample_split,
    write_point_cloud,
)
from pinvgcn.eigensolver import SpectralBasis, load_basis, save_basis, spectral_basis
from pinvgcn.errors import ClassTooSmall, MissingCheckpoint, PinvGCNError, RankTooLarge
from pinvgcn.filters import FilterBank, export_filter_response
from pinvgcn.graphs import LaplacianOperator
from pinvgcn.hypergraph import Hypergraph, hypergraph_spectral_basis
from pinvgcn.models import (
    BasisSummary,
    DatasetInfo,
    ExperimentConfig,
    RunResult,
    RunSummary,
    SplitSweepRow,
    SuiteReport,
    SweepRow,
    WeightSummary,
)
from pinvgcn.network import (
    Products,
    evaluate,
    load_checkpoint,
    precompute,
    save_checkpoint,
    train,
    weight_magnitude_analysis,
)
from pinvgcn.oracle_check import all_passed, run_oracle_suites

logger = logging.getLogger(__name__)

SWEEP_FIELDS = ["rank", "miscls_mean", "miscls_sd", "setup_s", "train_s"]
SPLIT_SWEEP_FIELDS = ["per_class", "miscls_mean", "miscls_sd", "setup_s", "train_s"]


def max_rank(dataset: Dataset) -> int:
    """Largest legal rank: |E| - 1 for hypergraphs, n - 1 otherwise."""
    if isinstance(dataset.source, Hypergraph):
        return dataset.source.m_e - 1
    return dataset.n - 1


def check_rank(dataset: Dataset, rank: int) -> None:
    limit = max_rank(dataset)
    if rank < 1 or rank > limit:
        raise RankTooLarge(f"rank {rank} is outside 1..{limit} for dataset {dataset.name}")


def _file_stamps(config: ExperimentConfig) -> dict:
    """Size and modification time of every input file of the dataset."""
    stamps = {}
    for attr in ("path", "schema_path", "labels_path", "features_path"):
        value = getattr(config.dataset, attr)
        if value is not None and Path(value).exists():
            stat = Path(value).stat()
            stamps[attr] = [stat.st_size, stat.st_mtime_ns]
    return stamps


def cache_path(config: ExperimentConfig, rank: Optional[int] = None) -> Path:
    """Cache file keyed by dataset spec and files, rank and solver settings."""
    rank = config.rank if rank is None else rank
    key = json.dumps(
        {
            "dataset": config.dataset.model_dump(exclude={"block_size"}),
            "files": _file_stamps(config),
            "rank": rank,
            "eigensolver": config.eigensolver.model_dump(),
        },
        sort_keys=True,
    )
    digest = hashlib.sha256(key.encode("utf-8")).hexdigest()[:12]
    return Path(config.cache_dir) / f"{config.dataset.name}-r{rank}-{digest}.npz"


def compute_basis(dataset: Dataset, config: ExperimentConfig) -> SpectralBasis:
    """Gram-matrix path for hypergraphs, restarted Lanczos for everything else."""
    check_rank(dataset, config.rank)
    if isinstance(dataset.source, Hypergraph):
        return hypergraph_spectral_basis(dataset.source, config.rank)
    op = LaplacianOperator.from_graph(dataset.source, config.dataset.block_size, config.threads)
    return spectral_basis(op, config.rank, config.eigensolver)


def obtain_basis(dataset: Dataset, config: ExperimentConfig) -> Tuple[SpectralBasis, float, bool]:
    """
    Load the cached basis or compute and cache it.

    Returns:
        (basis, seconds spent, whether the cache was used)
    """
    path = cache_path(config)
    start = time.perf_counter()
    if path.exists():
        basis = load_basis(str(path))
        if basis.n == dataset.n and basis.r == config.rank:
            logger.info("Cache hit: %s", path)
            return basis, time.perf_counter() - start, True
        logger.warning("Cached basis %s has n=%d, r=%d but %s has n=%d, rank %d; recomputing",
                       path, basis.n, basis.r, dataset.name, dataset.n, config.rank)
    logger.info("Cache miss: computing rank-%d basis for %s", config.rank, dataset.name)
    basis = compute_basis(dataset, config)
    seconds = time.perf_counter() - start
    save_basis(basis, str(path))
    return basis, seconds, False


def cmd_eigs(config: ExperimentConfig, dataset: Optional[Dataset] = None) -> BasisSummary:
    """Compute (or load) the spectral basis and report it."""
    dataset = dataset or DataLoader(config.dataset).load_data()
    basis, seconds, cached = obtain_basis(dataset, config)
    return BasisSummary(
        n=basis.n,
        r=basis.r,
        eigengap=basis.eigengap,
        lambdas=[float(x) for x in basis.lambdas],
        max_residual=float(basis.residuals.max()),
        seconds=seconds,
        cached=cached,
        path=str(cache_path(config)),
    )


def checkpoint_dir(output: str) -> Path:
    return Path(f"{output}.ckpt")


def run_once(run: int, dataset: Dataset, bank: FilterBank, products: Products,
             config: ExperimentConfig, setup_s: float,
             ckpt_dir: Optional[Path] = None) -> RunResult:
    """
    One training run with its own generator; failures become failed records.
    """
    seed = config.split.seed + run
    clock = time.perf_counter if config.timings else (lambda: 0.0)
    try:
        rng = run_generator(config.split.seed, run)
        split = sample_split(dataset.labels, dataset.m, config.split.per_class, rng)
        t0 = clock()
        params, history = train(bank, dataset.features, split, config.train, rng=rng,
                                products=products)
        t1 = clock()
        accuracy = evaluate(bank, dataset.features, params, split, products)
        t2 = clock()
        if ckpt_dir is not None:
            save_checkpoint(params, str(ckpt_dir / f"run_{run}.npz"))
    except PinvGCNError as exc:
        logger.error("Run %d failed: %s", run, exc)
        return RunResult(run=run, seed=seed, rank=config.rank, status="failed", error=str(exc))

    logger.info("Run %d: accuracy %.4f", run, accuracy)
    return RunResult(
        run=run,
        seed=seed,
        rank=config.rank,
        accuracy=accuracy,
        setup_s=setup_s,
        train_s=t1 - t0,
        eval_s=t2 - t1,
        final_loss=history[-1],
        mu=list(weight_magnitude_analysis(params)),
    )


def summarize(name: str, rank: int, results: Sequence[RunResult]) -> RunSummary:
    """Mean and sample standard deviation over the completed runs."""
    done = [r for r in results if r.status == "ok"]
    summary = RunSummary(dataset=name, rank=rank, runs=len(results), completed=len(done),
                         partial=len(done) < len(results))
    if not done:
        return summary
    accuracies = np.array([r.accuracy for r in done])
    summary.accuracy_mean = float(np.mean(accuracies))
    summary.accuracy_sd = float(np.std(accuracies, ddof=1)) if len(done) > 1 else None
    summary.setup_s = float(np.mean([r.setup_s for r in done]))
    summary.train_s = float(np.mean([r.train_s for r in done]))
    summary.eval_s = float(np.mean([r.eval_s for r in done]))
    summary.total_s = float(np.mean([r.total_s for r in done]))
    summary.mu_mean = [float(x) for x in np.mean([r.mu for r in done], axis=0)]
    return summary


def run_experiment(config: ExperimentConfig, dataset: Optional[Dataset] = None,
                   ckpt_dir: Optional[Path] = None) -> Tuple[List[RunResult], RunSummary]:
    """All runs of one configuration, ordered by run index."""
    dataset = dataset or DataLoader(config.dataset).load_data()
    check_rank(dataset, config.rank)
    start = time.perf_counter()
    basis, _, _ = obtain_basis(dataset, config)
    bank = FilterBank(basis)
    products = precompute(bank, dataset.features)
    setup_s = time.perf_counter() - start if config.timings else 0.0

    runs = range(config.split.run_count)
    if config.threads == 1:
        results = [run_once(j, dataset, bank, products, config, setup_s, ckpt_dir) for j in runs]
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(
                lambda j: run_once(j, dataset, bank, products, config, setup_s, ckpt_dir), runs
            ))
    return results, summarize(dataset.name, config.rank, results)


def write_results(path: str, results: Sequence[RunResult], summary: RunSummary) -> None:
    """Line-delimited JSON: one record per run, then the summary."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for result in results:
            f.write(result.model_dump_json() + "\n")
        f.write(summary.model_dump_json() + "\n")


def read_results(path: str) -> Tuple[List[RunResult], Optional[RunSummary]]:
    """Inverse of write_results."""
    results: List[RunResult] = []
    summary = None
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            record = json.loads(line)
            if record.get("record") == "summary":
                summary = RunSummary(**record)
            else:
                results.append(RunResult(**record))
    return results, summary


def cmd_train(config: ExperimentConfig, dataset: Optional[Dataset] = None) -> RunSummary:
    """Run every training run, write the results file and per-run checkpoints."""
    results, summary = run_experiment(config, dataset, checkpoint_dir(config.output))
    write_results(config.output, results, summary)
    logger.info("Wrote %d run records to %s", len(results), config.output)
    return summary


def _cell(value) -> str:
    if value is None:
        return ""
    return repr(float(value)) if isinstance(value, float) else str(value)


def cmd_sweep_rank(config: ExperimentConfig, ranks: Sequence[int], out_csv: str,
                   dataset: Optional[Dataset] = None) -> List[SweepRow]:
    """
    Train at every rank with the same split seeds and write a sweep CSV.

    Raises:
        RankTooLarge: before any run if a rank is illegal for the dataset
    """
    dataset = dataset or DataLoader(config.dataset).load_data()
    ordered = sorted(set(int(r) for r in ranks))
    for rank in ordered:
        check_rank(dataset, rank)

    rows: List[SweepRow] = []
    for rank in ordered:
        _, summary = run_experiment(config.model_copy(update={"rank": rank}), dataset)
        rows.append(SweepRow(
            rank=rank,
            miscls_mean=None if summary.accuracy_mean is None else 1.0 - summary.accuracy_mean,
            miscls_sd=summary.accuracy_sd,
            setup_s=summary.setup_s,
            train_s=summary.train_s,
        ))
        logger.info("Rank %d: misclassification %s", rank, rows[-1].miscls_mean)

    CSVHandler.write_csv(out_csv, SWEEP_FIELDS,
                         [[_cell(getattr(row, f)) for f in SWEEP_FIELDS] for row in rows])
    return rows


def cmd_sweep_split(config: ExperimentConfig, per_class: Sequence[int], out_csv: str,
                    dataset: Optional[Dataset] = None) -> List[SplitSweepRow]:
    """
    Train with every per-class training-set size at the experiment's rank and
    write a sweep CSV. The basis is computed once and shared.

    Raises:
        ClassTooSmall: before any run if a size exceeds the smallest class
    """
    dataset = dataset or DataLoader(config.dataset).load_data()
    check_rank(dataset, config.rank)
    ordered = sorted(set(int(k) for k in per_class))
    smallest = int(np.bincount(dataset.labels, minlength=dataset.m).min())
    for k in ordered:
        if k < 1 or k > smallest:
            raise ClassTooSmall(f"{k} samples per class requested; smallest class has {smallest}")

    rows: List[SplitSweepRow] = []
    for k in ordered:
        split = config.split.model_copy(update={"per_class": k})
        _, summary = run_experiment(config.model_copy(update={"split": split}), dataset)
        rows.append(SplitSweepRow(
            per_class=k,
            miscls_mean=None if summary.accuracy_mean is None else 1.0 - summary.accuracy_mean,
            miscls_sd=summary.accuracy_sd,
            setup_s=summary.setup_s,
            train_s=summary.train_s,
        ))
        logger.info("%d per class: misclassification %s", k, rows[-1].miscls_mean)

    CSVHandler.write_csv(out_csv, SPLIT_SWEEP_FIELDS,
                         [[_cell(getattr(row, f)) for f in SPLIT_SWEEP_FIELDS] for row in rows])
    return rows


def _checkpoint_source(path: str) -> Path:
    """A results file refers to its sibling `.ckpt` directory."""
    p = Path(path)
    return p if p.is_dir() else checkpoint_dir(path)


def cmd_analyze_weights(paths: Sequence[str], out_csv: Optional[str] = None) -> List[WeightSummary]:
    """
    Run-averaged weight magnitudes per filter part for each results file or
    checkpoint directory.

    Raises:
        MissingCheckpoint: if a source holds no run checkpoints
    """
    summaries: List[WeightSummary] = []
    for path in paths:
        directory = _checkpoint_source(path)
        files = sorted(directory.glob("run_*.npz"), key=lambda f: int(f.stem.split("_")[1])) \
            if directory.is_dir() else []
        if not files:
            raise MissingCheckpoint(f"no run checkpoints under {directory}")
        mu = np.mean([weight_magnitude_analysis(load_checkpoint(str(f))) for f in files], axis=0)
        name = directory.name[:-len(".ckpt")] if directory.name.endswith(".ckpt") else directory.name
        summaries.append(WeightSummary(dataset=Path(name).stem, runs=len(files),
                                       mu1=float(mu[0]), mu2=float(mu[1]), mu3=float(mu[2])))
    if out_csv:
        CSVHandler.write_csv_from_dicts(out_csv, [s.model_dump() for s in summaries])
    return summaries


def cmd_info(config: ExperimentConfig, dataset: Optional[Dataset] = None) -> DatasetInfo:
    """Dataset information row; the eigengap is filled in from a cached basis."""
    dataset = dataset or DataLoader(config.dataset).load_data()
    path = cache_path(config)
    eigengap = load_basis(str(path)).eigengap if path.exists() else None
    return dataset_info(dataset, config.split.per_class, eigengap)


def cmd_make_cloud(out: str, n: int, separation: float = 10.0, spread: float = 1.0,
                   seed: int = 0) -> None:
    points, labels = make_two_cluster_cloud(n, separation, spread, seed)
    write_point_cloud(out, points, labels)
    logger.info("Wrote %d-point two-cluster cloud to %s", n, out)


def cmd_filter_response(config: ExperimentConfig, out: str, alpha: float = 1.0,
                        beta: float = 1.0, gamma: float = 1.0, points: int = 401,
                        dataset: Optional[Dataset] = None) -> None:
    """Sample the low-rank filter for the experiment's basis and write it as CSV."""
    dataset = dataset or DataLoader(config.dataset).load_data()
    basis, _, _ = obtain_basis(dataset, config)
    export_filter_response(out, alpha, beta, gamma, basis, points)


def cmd_oracle_check(scale: int, seed: int = 0,
                     perturb: float = 0.0) -> Tuple[List[SuiteReport], bool]:
    """Run the oracle-equivalence suites; the flag is False if any suite failed."""
    reports = run_oracle_suites(scale, seed, perturb)
    passed = all_passed(reports)
    logger.info("Oracle check at scale %d: %s", scale, "pass" if passed else "FAIL")
    return reports, passed
