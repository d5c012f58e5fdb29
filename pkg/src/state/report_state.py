from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field


class ChiSquareResult(BaseModel):
    statistic: float
    dof: int
    p: float
    bins: int = Field(..., description="Bins after pooling small expectations.")
    total: int = Field(..., description="Number of observations.")


class TrajectoryScaling(BaseModel):
    slope: float
    n_t: List[int] = Field(..., description="n_t on the t grid.")
    upper_ratio_min: float = Field(..., description="min over the grid of n_t log^2 t / t^2.")
    upper_ratio_max: float
    lower_ratio_min: float = Field(..., description="min over the grid of n_t / (t^2 log^2 t).")
    lower_ratio_max: float


class ScalingReport(BaseModel):
    """Fit of log n_t against log t over a geometric grid of heights."""

    m0: int
    t_min: int
    t_max: int
    seed: int
    t_grid: List[int]
    trajectories: List[TrajectoryScaling] = Field(default_factory=list)
    median_slope: float
    mean_slope: float
    slope_interval: List[float] = Field(..., description="95% t-interval of the mean slope.")
    strips_checked: int = Field(default=0, description="Strips that passed both stop characterisations and the height bound.")


class MartingaleRow(BaseModel):
    m: int
    residual_square: str = Field(..., description="Exact E[X_{n+1} - X_n | M_n = m] for X = M^2 - 3n.")
    residual_additive: str = Field(..., description="Exact residual for X = M - sum 1/M_i.")
    second_moment: str = Field(..., description="Exact E[(X_{n+1} - X_n)^2 | m] for X = M^2 - 3n.")
    float_residual_square: float
    float_residual_additive: float


class SupCheckpoint(BaseModel):
    n: int
    median_boundary: float = Field(..., description="median over runs of sup M_n / sqrt(n log n) on (n/10, n].")
    median_additive: float = Field(..., description="median of sup |M_n - sum 1/M_i| / (sqrt(n) log n) on (n/10, n].")


class MartingaleReport(BaseModel):
    m_grid_size: int
    m_max: int
    rows: List[MartingaleRow] = Field(default_factory=list, description="A sample of the grid, for inspection.")
    max_abs_residual_square: float
    max_abs_residual_additive: float
    exact_zero: bool
    second_moment_ok: bool
    runs: int = 0
    seed: Optional[int] = None
    checkpoints: List[SupCheckpoint] = Field(default_factory=list)
    decreasing: Optional[bool] = None


class DualityRun(BaseModel):
    index: int
    final_ratio: float
    checkpoints: Dict[str, float] = Field(default_factory=dict, description="n -> ratio at dyadic n.")


class DualityReport(BaseModel):
    n: int
    m0: int
    seed: int
    low: float = 0.9
    high: float = 1.1
    runs: List[DualityRun] = Field(default_factory=list)
    fraction_within: float
    median_final_ratio: float
    dyadic_gaps: List[float] = Field(default_factory=list, description="median |ratio(n) - ratio(2n)| over dyadic n.")


class CheckResult(BaseModel):
    id: int
    name: str
    status: Literal["pass", "fail", "error"]
    detail: Dict[str, Any] = Field(default_factory=dict)
    seconds: float = 0.0


class VerifySummary(BaseModel):
    level: Literal["quick", "full"]
    seed: int
    status: Literal["pass", "fail"]
    checks: List[CheckResult] = Field(default_factory=list)
    thresholds: Dict[str, Any] = Field(default_factory=dict)
    seconds: float = 0.0
