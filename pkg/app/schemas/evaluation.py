from pydantic import BaseModel, Field, model_validator
from typing import List


class PolicyPrediction(BaseModel):
    """Predicted expected response under every treatment for one subject, and the choice h(x)."""
    per_treatment: List[float]
    chosen: int

    @model_validator(mode="after")
    def check_chosen(self) -> "PolicyPrediction":
        best = max(self.per_treatment)
        if self.chosen != self.per_treatment.index(best):
            raise ValueError("chosen must be the smallest label attaining the maximum")
        return self


class EvaluationReport(BaseModel):
    """z-bar estimate of a policy's expected response with its normal-approximation interval."""
    estimate: float
    std_error: float = Field(ge=0)
    ci_low: float
    ci_high: float
    conf_level: float = Field(gt=0, lt=1)
    n: int
    matched: List[int]

    @model_validator(mode="after")
    def check_interval(self) -> "EvaluationReport":
        if not self.ci_low <= self.estimate <= self.ci_high:
            raise ValueError("interval must contain the estimate")
        return self


class CurvePoint(BaseModel):
    fraction: float = Field(ge=0, le=1)
    report: EvaluationReport


class UpliftCurve(BaseModel):
    """Expected response against the fraction of the population sent to treatments."""
    points: List[CurvePoint]

    @model_validator(mode="after")
    def check_grid(self) -> "UpliftCurve":
        fractions = [p.fraction for p in self.points]
        if not fractions or fractions[0] != 0.0 or fractions[-1] != 1.0:
            raise ValueError("curve fractions must start at 0 and end at 1")
        if any(b <= a for a, b in zip(fractions, fractions[1:])):
            raise ValueError("curve fractions must be strictly increasing")
        return self
