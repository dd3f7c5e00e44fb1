from pydantic import BaseModel, Field, model_validator
from typing import Any, Optional, List, Dict, Literal, Union

from app.schemas.dataset import Schema

FORMAT_VERSION = "1"

SplitKind = Literal["numeric_threshold", "categorical_equals"]


class TreeParams(BaseModel):
    """Per-tree CTS parameters. ``mtry=None`` means ceil(d/2), ``max_depth=None`` unlimited."""
    min_split: int = Field(default=100, ge=1)
    n_reg: int = Field(default=3, ge=0)
    mtry: Optional[int] = Field(default=None, ge=1)
    max_depth: Optional[int] = Field(default=None, ge=1)

    model_config = {
        "extra": "forbid"
    }


class ForestParams(BaseModel):
    ntree: int = Field(default=100, ge=1)
    # bootstrap size per tree; None means b = N
    b: Optional[int] = Field(default=None, ge=1)
    tree: TreeParams = Field(default_factory=TreeParams)
    seed: int = Field(default=0, ge=0, lt=2**64)

    model_config = {
        "extra": "forbid"
    }


class SmaParams(BaseModel):
    ntree: int = Field(default=100, ge=1)
    mtry: Optional[int] = Field(default=None, ge=1)
    min_samples_leaf: int = Field(default=5, ge=1)
    # bagging per tree; off means every tree sees all rows of its treatment
    bootstrap: bool = True
    seed: int = Field(default=0, ge=0, lt=2**64)

    model_config = {
        "extra": "forbid"
    }


class SplitRecord(BaseModel):
    feature: int = Field(ge=0)
    feature_name: str
    kind: SplitKind
    # threshold for numeric splits, category code for equality splits
    value: float


class NodeRecord(BaseModel):
    """
    Fields of one node. In the document every node also carries ``left`` and
    ``right`` child records (null on leaves); trees are walked with explicit
    stacks, so nesting depth is unbounded.
    """
    estimates: List[float]
    counts: List[int]
    split: Optional[SplitRecord] = None

    @model_validator(mode="after")
    def check_shape(self) -> "NodeRecord":
        if len(self.estimates) != len(self.counts):
            raise ValueError("estimates and counts differ in length")
        return self


class ModelDocument(BaseModel):
    """Versioned on-disk form of a trained model."""
    format_version: str
    algorithm: Literal["cts", "sma-rf"]
    data_schema: Schema = Field(alias="schema")
    schema_fingerprint: str
    n_treatments: int = Field(ge=2)
    categories: Dict[str, List[str]] = {}
    params: Union[ForestParams, SmaParams]
    # cts: one nested node record per ensemble member, checked node by node on load
    trees: Optional[List[Dict[str, Any]]] = None
    # sma-rf: one list of trees per treatment
    forests: Optional[List[List[Dict[str, Any]]]] = None

    model_config = {
        "populate_by_name": True
    }

    @model_validator(mode="after")
    def check_payload(self) -> "ModelDocument":
        expected = ForestParams if self.algorithm == "cts" else SmaParams
        if not isinstance(self.params, expected):
            raise ValueError(f"{self.algorithm} model carries the wrong parameter block")
        if self.algorithm == "cts" and not self.trees:
            raise ValueError("cts model without trees")
        if self.algorithm == "sma-rf":
            if not self.forests or len(self.forests) != self.n_treatments:
                raise ValueError("sma-rf model needs one forest per treatment")
        return self
