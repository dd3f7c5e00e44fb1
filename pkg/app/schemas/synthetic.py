from pydantic import BaseModel, Field, model_validator
from typing import Dict, List, Optional


class SyntheticModelDocument(BaseModel):
    """Pinned constants of a synthetic benchmark instance."""
    d: int = Field(ge=1)
    m: int = Field(ge=1)
    n_treatments: int = Field(ge=2)
    alpha: float = Field(ge=0)
    sigma: float = Field(ge=0)
    a: List[float]
    b: List[List[float]]
    c: List[List[float]]
    seed: Optional[int] = None
    # dataset label -> treatment number of the data model (1..K)
    label_map: Dict[int, int] = {}

    @model_validator(mode="after")
    def check_shapes(self) -> "SyntheticModelDocument":
        if len(self.a) != self.m or len(self.b) != self.m or len(self.c) != self.m:
            raise ValueError("a, b and c need one entry per exponential term")
        if any(len(row) != self.d for row in self.b + self.c):
            raise ValueError("rows of b and c need one entry per dimension")
        if any(v <= 0 for row in self.b for v in row):
            raise ValueError("b entries must be strictly positive")
        if self.n_treatments > self.d:
            raise ValueError("each treatment needs its own feature coordinate")
        return self
