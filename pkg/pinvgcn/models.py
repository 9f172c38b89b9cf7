"""
Pydantic models for Pseudoinverse GCN configuration and reporting
"""
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


ColumnRole = Literal["categorical", "continuous", "binary", "label", "ignore"]
DatasetKind = Literal["point-cloud", "hypergraph", "sparse-graph"]


class EigSolveConfig(BaseModel):
    """Settings for the thick-restart Lanczos eigensolver"""
    tol: float = Field(default=1e-8, gt=0, description="Relative residual tolerance")
    max_subspace: Optional[int] = Field(
        default=None, ge=2,
        description="Krylov subspace dimension (default max(2r+10, 40))"
    )
    max_restarts: int = Field(default=200, ge=0, description="Restart limit")
    seed: int = Field(default=0, description="Seed for the random start vector")

    class Config:
        json_schema_extra = {
            "example": {"tol": 1e-3, "max_subspace": 60, "max_restarts": 200, "seed": 0}
        }

    def subspace_size(self, r: int) -> int:
        """Subspace dimension used for rank r."""
        if self.max_subspace is None:
            return max(2 * r + 10, 40)
        return self.max_subspace

    @classmethod
    def for_point_cloud(cls, **overrides) -> "EigSolveConfig":
        """Loose tolerance used for Gaussian point-cloud graphs."""
        return cls(**{"tol": 1e-3, **overrides})


class TrainConfig(BaseModel):
    """Training hyperparameters of the two-layer network"""
    hidden: int = Field(default=32, ge=1, description="Hidden width h")
    learning_rate: float = Field(default=0.01, gt=0, description="Adam learning rate")
    epochs: int = Field(default=500, ge=1, description="Full-batch training epochs")
    dropout: float = Field(default=0.5, ge=0, lt=1, description="Dropout rate between the layers")
    weight_decay: float = Field(default=0.0005, ge=0, description="Coupled L2 factor on weight matrices")
    beta1: float = Field(default=0.9, ge=0, lt=1, description="Adam first-moment decay")
    beta2: float = Field(default=0.999, ge=0, lt=1, description="Adam second-moment decay")
    epsilon: float = Field(default=1e-8, gt=0, description="Adam denominator offset")
    seed: int = Field(default=0, description="Seed for init and dropout masks of a direct train() call")
    tie_high_pass: bool = Field(
        default=False,
        description="Keep the high-pass weights equal to the pseudoinverse weights"
    )

    class Config:
        json_schema_extra = {
            "example": {
                "hidden": 32, "learning_rate": 0.01, "epochs": 500, "dropout": 0.5,
                "weight_decay": 0.0005, "tie_high_pass": False
            }
        }


class SplitSpec(BaseModel):
    """Per-class training split sampling"""
    per_class: int = Field(default=10, ge=1, description="Training samples per class")
    seed: int = Field(default=0, description="Base seed; run j uses seed + j")
    run_count: int = Field(default=1, ge=1, description="Number of independent runs")


class ColumnSpec(BaseModel):
    """Role of one column of a categorical table"""
    name: str = Field(..., description="Column name")
    role: ColumnRole = Field(..., description="categorical, continuous, binary, label or ignore")
    bins: int = Field(default=10, ge=1, description="Equal-width bins for continuous columns")


class CategoricalSchema(BaseModel):
    """Column roles used to turn a table into a hypergraph"""
    columns: List[ColumnSpec] = Field(..., min_length=1, description="One entry per table column")
    missing_values: List[str] = Field(default=["?", ""], description="Tokens treated as missing")
    skip_missing_columns: bool = Field(
        default=True,
        description="Drop a categorical column entirely if any value is missing"
    )
    keep_labels: Optional[List[str]] = Field(
        default=None,
        description="Keep only rows with these labels (applied before pruning)"
    )
    delimiter: str = Field(default=",", description="Field delimiter of the table")
    has_header: bool = Field(default=True, description="Whether the table starts with a header row")

    class Config:
        json_schema_extra = {
            "example": {
                "columns": [
                    {"name": "class", "role": "label"},
                    {"name": "cap-shape", "role": "categorical"},
                    {"name": "elevation", "role": "continuous", "bins": 10}
                ],
                "missing_values": ["?"],
                "keep_labels": None
            }
        }

    @field_validator("columns")
    @classmethod
    def _one_label(cls, columns: List[ColumnSpec]) -> List[ColumnSpec]:
        labels = [c for c in columns if c.role == "label"]
        if len(labels) != 1:
            raise ValueError(f"schema needs exactly one label column, found {len(labels)}")
        return columns

    @property
    def label_index(self) -> int:
        return next(i for i, c in enumerate(self.columns) if c.role == "label")


class DatasetSpec(BaseModel):
    """Where a dataset lives and how to read it"""
    path: str = Field(..., description="Data file")
    kind: DatasetKind = Field(..., description="point-cloud, hypergraph or sparse-graph")
    sigma: Optional[float] = Field(default=None, gt=0, description="Gaussian localization (point clouds)")
    schema_path: Optional[str] = Field(default=None, description="Schema file (hypergraphs)")
    labels_path: Optional[str] = Field(default=None, description="Label file (sparse graphs)")
    features_path: Optional[str] = Field(default=None, description="Feature file (sparse graphs)")
    block_size: Optional[int] = Field(default=None, ge=1, description="Gaussian matvec row block")
    keep_labels: Optional[List[str]] = Field(
        default=None, description="Class subset for categorical tables (overrides the schema)"
    )

    @model_validator(mode="after")
    def _kind_fields(self) -> "DatasetSpec":
        if self.kind == "point-cloud" and self.sigma is None:
            raise ValueError("point-cloud datasets need sigma")
        if self.kind == "hypergraph" and self.schema_path is None:
            raise ValueError("hypergraph datasets need schema_path")
        if self.kind == "sparse-graph" and self.labels_path is None:
            raise ValueError("sparse-graph datasets need labels_path")
        for attr in ("path", "schema_path", "labels_path", "features_path"):
            value = getattr(self, attr)
            if value is not None and not Path(value).exists():
                raise ValueError(f"{attr} does not exist: {value}")
        return self

    @property
    def name(self) -> str:
        return Path(self.path).stem


class ExperimentConfig(BaseModel):
    """Everything a benchmark command needs"""
    dataset: DatasetSpec
    rank: int = Field(..., ge=1, description="Approximation rank r")
    split: SplitSpec = Field(default_factory=SplitSpec)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eigensolver: EigSolveConfig = Field(default_factory=EigSolveConfig)
    output: str = Field(default="results.jsonl", description="Results file")
    threads: int = Field(default=1, ge=1, description="Worker threads")
    cache_dir: str = Field(default=".pinvgcn_cache", description="Spectral basis cache directory")
    timings: bool = Field(default=True, description="Record wall-clock phase times (false writes zeros)")

    @model_validator(mode="after")
    def _one_seed(self) -> "ExperimentConfig":
        # runs draw split, init and masks from run_generator(split.seed, j)
        if "seed" in self.train.model_fields_set:
            raise ValueError("train.seed is not used by experiment runs; set split.seed instead")
        return self


class RunResult(BaseModel):
    """Outcome of one training run"""
    record: Literal["run"] = "run"
    run: int = Field(..., ge=0, description="Run index")
    seed: int = Field(..., description="Seed used for split, init and dropout")
    rank: int = Field(..., ge=1, description="Rank r")
    status: Literal["ok", "failed"] = Field(default="ok")
    accuracy: Optional[float] = Field(default=None, ge=0, le=1, description="Accuracy on non-training nodes")
    setup_s: float = Field(default=0.0, ge=0, description="Eigensolve / basis setup seconds")
    train_s: float = Field(default=0.0, ge=0, description="Training seconds")
    eval_s: float = Field(default=0.0, ge=0, description="Evaluation seconds")
    final_loss: Optional[float] = Field(default=None, description="Training loss of the last epoch")
    mu: Optional[List[float]] = Field(default=None, description="Average absolute weights per filter part")
    error: Optional[str] = Field(default=None, description="Failure message")

    class Config:
        json_schema_extra = {
            "example": {
                "record": "run", "run": 0, "seed": 0, "rank": 111, "status": "ok",
                "accuracy": 0.9135, "setup_s": 0.41, "train_s": 3.1, "eval_s": 0.02,
                "final_loss": 0.05, "mu": [0.137, 0.249, 0.082], "error": None
            }
        }

    @property
    def total_s(self) -> float:
        return self.setup_s + self.train_s + self.eval_s


class RunSummary(BaseModel):
    """Aggregate over all runs of one command"""
    record: Literal["summary"] = "summary"
    dataset: str = Field(..., description="Dataset name")
    rank: int = Field(..., ge=1)
    runs: int = Field(..., ge=0, description="Runs attempted")
    completed: int = Field(..., ge=0, description="Runs that finished")
    partial: bool = Field(default=False, description="True if any run failed")
    accuracy_mean: Optional[float] = Field(default=None, description="Mean accuracy")
    accuracy_sd: Optional[float] = Field(default=None, description="Sample standard deviation")
    setup_s: float = Field(default=0.0, ge=0, description="Mean setup seconds")
    train_s: float = Field(default=0.0, ge=0, description="Mean training seconds")
    eval_s: float = Field(default=0.0, ge=0, description="Mean evaluation seconds")
    total_s: float = Field(default=0.0, ge=0, description="Mean combined seconds")
    mu_mean: Optional[List[float]] = Field(default=None, description="Run-averaged weight magnitudes")


class SweepRow(BaseModel):
    """One rank of a rank sweep"""
    rank: int
    miscls_mean: Optional[float]
    miscls_sd: Optional[float]
    setup_s: float
    train_s: float


class SplitSweepRow(BaseModel):
    """One training-set size of a split sweep"""
    per_class: int
    miscls_mean: Optional[float]
    miscls_sd: Optional[float]
    setup_s: float
    train_s: float


class BasisSummary(BaseModel):
    """Report of an eigensolve or cache load"""
    n: int
    r: int
    eigengap: float
    lambdas: List[float]
    max_residual: float
    seconds: float = Field(..., ge=0)
    cached: bool
    path: str


class WeightSummary(BaseModel):
    """Run-averaged weight magnitudes per filter part"""
    dataset: str
    runs: int
    mu1: float
    mu2: float
    mu3: float


class DatasetInfo(BaseModel):
    """Dataset information row"""
    name: str
    kind: DatasetKind
    n: int
    classes: int
    hyperedges: Optional[int] = None
    label_rate: Optional[float] = None
    diameter: Optional[float] = None
    eigengap: Optional[float] = None


class SuiteReport(BaseModel):
    """Outcome of one oracle-equivalence suite"""
    name: str
    status: Literal["pass", "fail", "skipped"]
    max_error: Optional[float] = None
    tolerance: Optional[float] = None
    detail: str = ""
