from fractions import Fraction
from typing import Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


# Signs of consecutive moves, +1 for a (+)-move and -1 for a (-)-move.
MoveSequence = List[int]


class Move(BaseModel):
    """A single growth move; ``sign`` is the boundary increment."""

    model_config = ConfigDict(frozen=True)

    sign: Literal[1, -1] = Field(..., description="+1 adds a vertex, -1 consumes one.")

    @classmethod
    def coerce(cls, move: Union["Move", int, str]) -> "Move":
        if isinstance(move, Move):
            return move
        if isinstance(move, str):
            if move == "+":
                return cls(sign=1)
            if move in ("-", "−"):
                return cls(sign=-1)
            raise ValueError(f"unknown move symbol {move!r}")
        return cls(sign=int(move))  # type: ignore[arg-type]


PLUS = Move(sign=1)
MINUS = Move(sign=-1)


class BoundaryTrajectory(BaseModel):
    """
    A sampled path M_0, M_1, ... of the boundary-length chain together with
    the moves that produced it.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    m0: int = Field(..., ge=1, description="Initial boundary length in edges.")
    values: np.ndarray = Field(..., description="M_n for n = 0..len-1 (int64).")
    moves: np.ndarray = Field(..., description="Move signs, one fewer than values (int8).")
    seed: int = Field(default=0, description="64-bit token of the stream that produced the path.")

    @model_validator(mode="after")
    def _check_invariants(self) -> "BoundaryTrajectory":
        values = np.asarray(self.values, dtype=np.int64)
        moves = np.asarray(self.moves, dtype=np.int8)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("values must be a non-empty 1-d array")
        if int(values[0]) != self.m0:
            raise ValueError("values[0] must equal m0")
        if moves.size != values.size - 1:
            raise ValueError("moves must be one shorter than values")
        if values.min() < 1:
            raise ValueError("boundary length dropped below 1")
        if not np.array_equal(np.diff(values), moves.astype(np.int64)):
            raise ValueError("moves disagree with consecutive values")
        if moves.size and not np.all(np.abs(moves) == 1):
            raise ValueError("every move must be +1 or -1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "moves", moves)
        return self

    @property
    def n_steps(self) -> int:
        return int(self.moves.size)


class StripStops(BaseModel):
    """Strip stopping times n_1 = 0 < n_2 < ... and the boundary length at each."""

    times: List[int] = Field(default_factory=list)
    boundary_at_stop: List[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check(self) -> "StripStops":
        if len(self.times) != len(self.boundary_at_stop):
            raise ValueError("times and boundary_at_stop differ in length")
        if self.times and self.times[0] != 0:
            raise ValueError("n_1 must be 0")
        for a, b in zip(self.times, self.times[1:]):
            if b <= a:
                raise ValueError("stopping times must increase")
        return self

    @property
    def count(self) -> int:
        return len(self.times)


class StripKernelEnumeration(BaseModel):
    """Exact strip-kernel masses found by enumerating move sequences."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    m: int = Field(..., ge=1)
    len_cap: int = Field(..., ge=0)
    probs: Dict[int, Fraction] = Field(default_factory=dict, description="k -> exact mass.")
    residual: Fraction = Field(default=Fraction(0), description="Mass of strips longer than len_cap.")


class StripKernelRow(BaseModel):
    m: int
    k: int
    p_exact: float
    p_bruteforce: Optional[float] = None
