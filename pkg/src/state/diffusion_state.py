from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class SdeSpec(BaseModel):
    """
    One of the two limiting diffusions.

    GROWTH: dM = (1/M) du + dB (growth clock).
    SLICE:  dL = 2 ds + sqrt(2 L) dB (slice clock).

    ``noise_scale`` multiplies the diffusion coefficient; 0 gives the drift ODE.
    """

    model_config = ConfigDict(frozen=True)

    name: Literal["GROWTH", "SLICE"]
    noise_scale: float = Field(default=1.0, ge=0.0)

    def drift(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.name == "GROWTH":
            return 1.0 / x
        return np.full_like(x, 2.0)

    def noise(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.name == "GROWTH":
            return np.full_like(x, self.noise_scale)
        return self.noise_scale * np.sqrt(2.0 * np.maximum(x, 0.0))

    def with_noise(self, scale: float) -> "SdeSpec":
        return SdeSpec(name=self.name, noise_scale=scale)


GROWTH = SdeSpec(name="GROWTH")
SLICE = SdeSpec(name="SLICE")


class SdePath(BaseModel):
    """A discretised path on the uniform grid 0, dt, 2 dt, ..."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    spec: str = Field(..., description="Name of the diffusion, or a derived label.")
    dt: float = Field(..., gt=0.0)
    values: np.ndarray
    floor: float = Field(default=1e-6, ge=0.0)
    cutoff: float = Field(default=0.0, ge=0.0, description="Level below which drift and clock integrands are frozen.")
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _check(self) -> "SdePath":
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("values must be a non-empty 1-d array")
        object.__setattr__(self, "values", values)
        return self

    @property
    def horizon(self) -> float:
        return (self.values.size - 1) * self.dt

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.values.size, dtype=np.float64) * self.dt

    def at(self, time: float) -> float:
        return float(np.interp(time, self.grid, self.values))


class TimeChange(BaseModel):
    """The additive clock tau_u = int_0^u g(X_v) dv along a path, on the path's grid."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    dt: float = Field(..., gt=0.0)
    clock: np.ndarray

    @model_validator(mode="after")
    def _check(self) -> "TimeChange":
        clock = np.asarray(self.clock, dtype=np.float64)
        if clock.size == 0 or clock[0] != 0.0:
            raise ValueError("clock must start at 0")
        if np.any(np.diff(clock) < 0):
            raise ValueError("clock must be nondecreasing")
        object.__setattr__(self, "clock", clock)
        return self

    @property
    def reach(self) -> float:
        return float(self.clock[-1])

    def inverse(self, s: np.ndarray) -> np.ndarray:
        """tau^{-1}(s) by linear interpolation."""
        grid = np.arange(self.clock.size, dtype=np.float64) * self.dt
        return np.interp(s, self.clock, grid)
