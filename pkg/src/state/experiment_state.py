from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


COMMANDS = (
    "grow",
    "sample",
    "strip-kernel",
    "slice-dist",
    "fractal-dim",
    "diffusion-check",
    "duality",
    "martingales",
    "verify",
)


class ExperimentConfig(BaseModel):
    """Fully-resolved description of one CLI run; echoed into every artifact it writes."""

    model_config = ConfigDict(extra="forbid")

    command: Literal[
        "grow",
        "sample",
        "strip-kernel",
        "slice-dist",
        "fractal-dim",
        "diffusion-check",
        "duality",
        "martingales",
        "verify",
    ]
    seed: int = 7
    output_dir: str = "outputs"
    format: Literal["csv", "json"] = "json"
    level: Literal["quick", "full"] = "quick"
    threads: Optional[int] = Field(default=None, ge=1)

    m0: Optional[int] = Field(default=None, ge=1, description="Initial boundary length; 1 when unset.")
    m: Optional[int] = Field(default=None, ge=1, description="Boundary length for strip-kernel runs.")
    moves: Optional[str] = None
    export: Optional[str] = None

    n_steps: Optional[int] = Field(default=None, ge=0)
    t_max: Optional[int] = Field(default=None, ge=1)
    j_max: Optional[int] = Field(default=None, ge=1)
    samples: Optional[int] = Field(default=None, ge=1)
    slice_samples: Optional[int] = Field(default=None, ge=1)
    functional_samples: Optional[int] = Field(default=None, ge=1)
    trajectories: Optional[int] = Field(default=None, ge=1)
    runs: Optional[int] = Field(default=None, ge=1)
    len_cap: Optional[int] = Field(default=None, ge=1)
    tail: Optional[float] = Field(default=None, gt=0.0)

    n: Optional[int] = Field(default=None, ge=1, description="Rescaling parameter of the growth clock.")
    u: Optional[float] = Field(default=None, ge=0.0)
    t: Optional[int] = Field(default=None, ge=1, description="Rescaling parameter of the slice clock.")
    s: Optional[float] = Field(default=None, ge=0.0)
    dt: Optional[float] = Field(default=None, gt=0.0)
    horizon: Optional[float] = Field(default=None, gt=0.0)
    m_max: Optional[int] = Field(default=None, ge=1)
    n_grid: Optional[List[int]] = Field(default=None, min_length=2, description="Increasing growth-clock rescalings for the convergence trend.")
    trend_samples: Optional[int] = Field(default=None, ge=1)
