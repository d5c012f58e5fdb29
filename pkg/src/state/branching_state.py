from fractions import Fraction
from typing import Dict, Iterator, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class GwState(BaseModel):
    """Population of the branching chain at one generation."""

    generation: int = Field(..., ge=0)
    population: int = Field(..., ge=0, description="eta_j; >= 1 for the conditioned chain.")
    conditioned: bool = True

    @model_validator(mode="after")
    def _check(self) -> "GwState":
        if self.conditioned and self.population < 1:
            raise ValueError("the conditioned chain never hits 0")
        return self


class SliceMarginal(BaseModel):
    """Law of the generation-j population of the size-biased chain started at m0."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    m0: int = Field(..., ge=1)
    j: int = Field(..., ge=0)
    trunc: int = Field(..., ge=1, description="Largest population tracked by the convolution.")
    probs: Dict[int, Union[float, Fraction]] = Field(default_factory=dict)
    residual: Union[float, Fraction] = Field(default=0.0, description="Mass above trunc.")

    def as_rows(self) -> Iterator[Tuple[int, int, int, float]]:
        for m in sorted(self.probs):
            yield (self.m0, self.j, m, float(self.probs[m]))
