from pydantic import BaseModel, Field, model_validator
from typing import Optional, List, Dict, Literal

from app.schemas.dataset import Schema
from app.schemas.model import ForestParams, SmaParams

Algorithm = Literal["cts", "sma-rf"]

# min_split grid used for the synthetic experiments
DEFAULT_CTS_GRID = [25, 50, 100, 200, 400, 800, 1600, 3200, 6400]
DEFAULT_SMA_GRID = [1, 5, 10, 20]
DEFAULT_BENCHMARK_SIZES = [500, 2000, 4000, 8000, 16000, 32000]


class TuneSettings(BaseModel):
    """Grid search over min_split (cts) or min_samples_leaf (sma-rf)."""
    grid: Optional[List[int]] = None
    folds: int = Field(default=5, ge=2)
    # set to use a single train/validate split instead of k-fold CV
    validation_fraction: Optional[float] = Field(default=None, gt=0, lt=1)

    model_config = {
        "extra": "forbid"
    }


class BenchmarkSettings(BaseModel):
    sizes: List[int] = Field(default_factory=lambda: list(DEFAULT_BENCHMARK_SIZES), min_length=1)
    replications: int = Field(default=10, ge=1)
    algorithms: List[Algorithm] = Field(default_factory=lambda: ["cts", "sma-rf"], min_length=1)
    mc_draws: int = Field(default=1_000_000, ge=1)
    # tune on the first replication of every size and reuse the value
    tune: bool = False

    model_config = {
        "extra": "forbid"
    }


class RunConfig(BaseModel):
    """
    Everything a command needs to reproduce a run. ``seed`` is the master seed
    and is copied into both parameter blocks.
    """
    data_schema: Optional[Schema] = Field(default=None, alias="schema")
    algorithm: Algorithm = "cts"
    cts: ForestParams = Field(default_factory=ForestParams)
    sma: SmaParams = Field(default_factory=SmaParams)
    seed: int = Field(default=0, ge=0, lt=2**64)
    control: int = Field(default=0, ge=0)
    conf_level: Optional[float] = Field(default=None, gt=0, lt=1)
    probs: Optional[List[float]] = None
    n_jobs: Optional[int] = None
    tune: TuneSettings = Field(default_factory=TuneSettings)
    benchmark: BenchmarkSettings = Field(default_factory=BenchmarkSettings)
    outputs: Dict[str, str] = {}

    model_config = {
        "extra": "forbid",
        "populate_by_name": True,
    }

    @model_validator(mode="after")
    def sync_seed(self) -> "RunConfig":
        if self.cts.seed != self.seed:
            self.cts = self.cts.model_copy(update={"seed": self.seed})
        if self.sma.seed != self.seed:
            self.sma = self.sma.model_copy(update={"seed": self.seed})
        return self

    @property
    def params(self):
        return self.cts if self.algorithm == "cts" else self.sma
