"""
Experiment files and environment defaults.

Experiment files are INI-style:

    [dataset]
    path = data/agaricus-lepiota.data
    kind = hypergraph
    schema = schemas/mushroom.schema

    [eigensolver]
    rank = 111

    [split]
    per_class = 10
    runs = 100

    [train]
    epochs = 500

    [output]
    path = results/mushroom.jsonl

Relative dataset paths are resolved against the directory of the experiment
file; output paths are taken as given.
"""
import configparser
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from pinvgcn.errors import ConfigError
from pinvgcn.models import DatasetSpec, EigSolveConfig, ExperimentConfig, SplitSpec, TrainConfig

logger = logging.getLogger(__name__)

SECTIONS = ("dataset", "eigensolver", "split", "train", "output")
# file key -> DatasetSpec field
DATASET_KEYS = {
    "path": "path", "kind": "kind", "sigma": "sigma", "schema": "schema_path",
    "labels": "labels_path", "features": "features_path", "block_size": "block_size",
    "keep_labels": "keep_labels",
}
PATH_FIELDS = ("path", "schema_path", "labels_path", "features_path")


class Settings(BaseModel):
    """Process-level defaults read from the environment"""
    cache_dir: str = Field(default=".pinvgcn_cache", description="PINVGCN_CACHE_DIR")
    threads: int = Field(default=1, ge=1, description="PINVGCN_THREADS")
    block_size: int = Field(default=256, ge=1, description="PINVGCN_BLOCK_SIZE")
    log_level: str = Field(default="INFO", description="PINVGCN_LOG_LEVEL")

    @classmethod
    def from_env(cls) -> "Settings":
        """Read PINVGCN_* variables, after loading a .env file if present."""
        load_dotenv()
        values = {
            "cache_dir": os.getenv("PINVGCN_CACHE_DIR"),
            "threads": os.getenv("PINVGCN_THREADS"),
            "block_size": os.getenv("PINVGCN_BLOCK_SIZE"),
            "log_level": os.getenv("PINVGCN_LOG_LEVEL"),
        }
        try:
            return cls(**{k: v for k, v in values.items() if v})
        except ValidationError as exc:
            raise ConfigError(f"invalid PINVGCN_* environment: {exc}") from exc


def _section(parser: configparser.ConfigParser, name: str) -> Dict[str, str]:
    if not parser.has_section(name):
        return {}
    return {k: v.strip() for k, v in parser.items(name) if v.strip()}


def _resolve(base: Path, value: str) -> str:
    path = Path(value)
    return str(path if path.is_absolute() else base / path)


def load_experiment(path: str, overrides: Optional[Dict[str, Any]] = None,
                    settings: Optional[Settings] = None) -> ExperimentConfig:
    """
    Read an experiment file and apply command-line overrides.

    Args:
        path: INI experiment file
        overrides: Optional values for rank, runs, seed, per_class, out, threads,
            tie_high_pass, timings (None entries are ignored)
        settings: Environment defaults (read from the environment if omitted)

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigError: on a missing file, unknown keys or invalid values
    """
    if not Path(path).exists():
        raise ConfigError(f"experiment file not found: {path}")
    settings = settings or Settings.from_env()
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {', '.join(unknown)}")
    base = Path(path).resolve().parent

    dataset_raw = _section(parser, "dataset")
    extra = set(dataset_raw) - set(DATASET_KEYS)
    if extra:
        raise ConfigError(f"{path}: unknown [dataset] key(s) {', '.join(sorted(extra))}")
    dataset: Dict[str, Any] = {DATASET_KEYS[k]: v for k, v in dataset_raw.items()}
    for key in PATH_FIELDS:
        if key in dataset:
            dataset[key] = _resolve(base, dataset[key])
    if "keep_labels" in dataset:
        dataset["keep_labels"] = dataset["keep_labels"].replace(",", " ").split()
    dataset.setdefault("block_size", settings.block_size)

    eig = _section(parser, "eigensolver")
    rank = overrides.get("rank", eig.pop("rank", None))
    if rank is None:
        raise ConfigError(f"{path}: no rank given ([eigensolver] rank or --rank)")

    split = _section(parser, "split")
    if "runs" in split:
        split["run_count"] = split.pop("runs")
    if "runs" in overrides:
        split["run_count"] = overrides["runs"]
    if "seed" in overrides:
        split["seed"] = overrides["seed"]
    if "per_class" in overrides:
        split["per_class"] = overrides["per_class"]

    train = _section(parser, "train")
    if "tie_high_pass" in overrides:
        train["tie_high_pass"] = overrides["tie_high_pass"]

    output = _section(parser, "output")
    out_path = overrides.get("out") or output.get("path")

    try:
        dataset_spec = DatasetSpec(**dataset)
        if "tol" not in eig and dataset_spec.kind == "point-cloud":
            eigensolver = EigSolveConfig.for_point_cloud(**eig)
        else:
            eigensolver = EigSolveConfig(**eig)
        config = ExperimentConfig(
            dataset=dataset_spec,
            rank=rank,
            split=SplitSpec(**split),
            train=TrainConfig(**train),
            eigensolver=eigensolver,
            output=out_path or ExperimentConfig.model_fields["output"].default,
            threads=overrides.get("threads", output.get("threads", settings.threads)),
            cache_dir=output.get("cache_dir", settings.cache_dir),
            timings=overrides.get("timings", output.get("timings", True)),
        )
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    logger.info("Loaded experiment %s: dataset %s, rank %d, %d run(s)",
                path, config.dataset.name, config.rank, config.split.run_count)
    return config
