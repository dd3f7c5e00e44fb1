from pydantic import BaseModel, Field, field_validator, model_validator
from typing import List, Literal, Dict
import hashlib
import json
import math

ColumnRole = Literal["numeric_feature", "categorical_feature", "treatment", "response"]

FEATURE_ROLES = ("numeric_feature", "categorical_feature")


class ColumnSpec(BaseModel):
    name: str = Field(min_length=1)
    role: ColumnRole


class Schema(BaseModel):
    """Ordered column declaration of a tabular experiment log."""
    columns: List[ColumnSpec]

    @model_validator(mode="after")
    def check_roles(self) -> "Schema":
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate column names: {dupes}")
        roles = [c.role for c in self.columns]
        if roles.count("treatment") != 1:
            raise ValueError("schema needs exactly one treatment column")
        if roles.count("response") != 1:
            raise ValueError("schema needs exactly one response column")
        if not any(r in FEATURE_ROLES for r in roles):
            raise ValueError("schema needs at least one feature column")
        return self

    @property
    def names(self) -> List[str]:
        return [c.name for c in self.columns]

    @property
    def feature_columns(self) -> List[ColumnSpec]:
        return [c for c in self.columns if c.role in FEATURE_ROLES]

    @property
    def feature_names(self) -> List[str]:
        return [c.name for c in self.feature_columns]

    @property
    def categorical_mask(self) -> List[bool]:
        return [c.role == "categorical_feature" for c in self.feature_columns]

    @property
    def treatment_column(self) -> str:
        return next(c.name for c in self.columns if c.role == "treatment")

    @property
    def response_column(self) -> str:
        return next(c.name for c in self.columns if c.role == "response")

    def fingerprint(self) -> str:
        """Stable digest of the feature layout; trees check it before routing."""
        payload = json.dumps(
            [[c.name, c.role] for c in self.feature_columns], separators=(",", ":")
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    @classmethod
    def from_names(cls,
                   numeric: List[str],
                   categorical: List[str],
                   treatment: str,
                   response: str) -> "Schema":
        columns = [ColumnSpec(name=n, role="numeric_feature") for n in numeric]
        columns += [ColumnSpec(name=n, role="categorical_feature") for n in categorical]
        columns.append(ColumnSpec(name=treatment, role="treatment"))
        columns.append(ColumnSpec(name=response, role="response"))
        return cls(columns=columns)


class TreatmentProbs(BaseModel):
    """Assignment probabilities p_t of the randomized experiment, indexed by label."""
    probs: List[float]

    @field_validator("probs")
    @classmethod
    def check_probs(cls, v: List[float]) -> List[float]:
        if len(v) < 2:
            raise ValueError("need probabilities for at least two treatments")
        for t, p in enumerate(v):
            if not math.isfinite(p) or p <= 0:
                raise ValueError(f"probability of treatment {t} must be positive, got {p}")
        if abs(math.fsum(v) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {math.fsum(v)}, not 1")
        return v

    @property
    def n_treatments(self) -> int:
        return len(self.probs)


CategoryMap = Dict[str, List[str]]
