"""
Pydantic models for configurations, records, summaries and API payloads
"""
from datetime import datetime
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

ModelName = Literal["complete", "er1", "er2", "cg-seq", "coupled", "er2-coupled"]
OracleModelName = Literal["complete", "er1", "cg-seq", "coupled", "er2", "er2-coupled"]


class LawSpec(BaseModel):
    """Resource law: either a constant or a list of (value, probability) pairs"""
    constant: Optional[int] = Field(None, ge=0, description="K is almost surely this value")
    pmf: Optional[List[Tuple[int, float]]] = Field(None, description="(value, probability) pairs")

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.constant is None) == (self.pmf is None):
            raise ValueError("Give exactly one of 'constant' or 'pmf'")
        return self

    def to_law(self):
        from app.core.resource import make_law

        if self.constant is not None:
            return make_law(constant=self.constant)
        return make_law(self.pmf)

    @classmethod
    def from_text(cls, text: str) -> "LawSpec":
        """Parse ``"2"`` (constant) or ``"0:0.5,2:0.5"`` (pmf)"""
        text = text.strip()
        try:
            if ":" not in text:
                return cls(constant=int(text))
            pairs = []
            for chunk in text.split(","):
                value, prob = chunk.split(":")
                pairs.append((int(value), float(prob)))
        except ValueError as e:
            raise ValueError(f"Cannot parse resource law '{text}'") from e
        return cls(pmf=pairs)


class TheoryRequest(BaseModel):
    """Request model for theoretical predictions"""
    law: LawSpec
    p: float = Field(1.0, ge=0.0, le=1.0, description="Edge probability")
    mode: Literal[1, 2] = Field(1, description="1: per-attempt edge check, 2: push to a neighbor")


class TheoryPrediction(BaseModel):
    """Limits predicted for a resource law and edge probability"""
    mode: int
    p: float
    mean_k: float
    var_k: float
    mean_k_hat: float
    var_k_hat: float
    q: float = Field(..., description="Positive root of m q + ln(1 - q) = 0 for m = E K")
    q_hat: float = Field(..., description="Same root for m = p E K")
    sigma_gw: float = Field(..., description="Survival probability of the Galton-Watson tree with offspring K")
    sigma_gw_hat: float = Field(..., description="Survival probability with thinned offspring")
    var_clt: Optional[float] = Field(None, description="Limit variance, absent when E K <= 1")
    var_clt_hat: Optional[float] = Field(None, description="Thinned limit variance, absent when p E K <= 1")
    supercritical: bool
    supercritical_hat: bool
    q_star: float = Field(..., description="Limit proportion relevant to the mode")
    sigma_star: float
    var_star: Optional[float] = None
    epsilon_max: float = Field(..., description="Limit of the absorption time over n on the complete graph")


class ExperimentConfig(BaseModel):
    """A replicated Monte Carlo experiment"""
    model: ModelName
    n: int = Field(..., ge=1, description="Number of servers")
    p: float = Field(1.0, ge=0.0, le=1.0, description="Edge probability")
    law: LawSpec
    replicas: int = Field(1, ge=1, description="Number of replicas R")
    base_seed: int = Field(0, ge=0, description="Replica r uses a seed derived from (base_seed, r)")
    survival_epsilon: Optional[float] = Field(
        None, gt=0.0, lt=1.0, description="Survival threshold as a fraction of n; default q*/2"
    )
    trace: Literal["none", "summary", "full"] = Field(
        "none", description="Per-replica traces, replayed from the replica seeds after the run"
    )


class ReplicaRecord(BaseModel):
    """Outcome of one replica"""
    replica_id: int
    seed: int
    tau: int
    final_informed: int
    survived: bool
    standardized: Optional[float] = None


class ChiSquareResult(BaseModel):
    """Pearson goodness-of-fit against the exact small-instance law"""
    statistic: float
    dof: int
    p_value: float


class Summary(BaseModel):
    """Statistics computed from a list of replica records"""
    replicas: int
    survivors: int
    survival_fraction: float
    epsilon: float
    conditional_mean_tau_over_n: Optional[float] = Field(
        None, description="Mean of final_informed / n over survivors"
    )
    conditional_mean_stderr: Optional[float] = None
    conditional_var_standardized: Optional[float] = None
    ks_distance: Optional[float] = None
    chi_square: Optional[ChiSquareResult] = None
    insufficient_data: bool = False
    theory: TheoryPrediction


class ExperimentResult(BaseModel):
    """Artifact of an experiment: echoed config, tool version, summary and records"""
    version: str
    config: ExperimentConfig
    summary: Summary
    records: List[ReplicaRecord] = Field(default_factory=list)
    run_id: Optional[int] = None


class SimulateRequest(BaseModel):
    """Request model for a single seeded run"""
    model: ModelName
    n: int = Field(..., ge=1)
    p: float = Field(1.0, ge=0.0, le=1.0)
    law: LawSpec
    seed: int = Field(0, ge=0)
    trace: Literal["none", "summary", "full"] = "none"


class SimulationResult(BaseModel):
    """Outcome of a single run plus its optional trace table"""
    version: str
    config: SimulateRequest
    tau: int
    final_informed: int
    extra: Dict[str, int] = Field(default_factory=dict, description="Model-specific stopping times and counts")
    trace_header: List[str] = Field(default_factory=list)
    trace_rows: List[List[int]] = Field(default_factory=list)
    snapshots: List[dict] = Field(default_factory=list)


class OracleRequest(BaseModel):
    """Request model for the exact small-instance distribution"""
    model: OracleModelName
    n: int = Field(..., ge=1)
    p: float = Field(1.0, ge=0.0, le=1.0)
    law: LawSpec
    depth_cap: int = Field(24, ge=1, description="Most random variables enumerated along one path")
    statistic: Literal["final", "joint"] = "final"


class OracleResponse(BaseModel):
    """Exact pmf keyed by outcome (a count, or 'time,count' for joint laws)"""
    version: str
    config: OracleRequest
    pmf: Dict[str, float]


class RunListItem(BaseModel):
    """Stored experiment as listed by the results store"""
    id: int
    model: str
    n: int
    p: float
    replicas: int
    survival_fraction: Optional[float]
    created_at: datetime


class StoreStatsResponse(BaseModel):
    """Response model for results-store statistics"""
    total_runs: int
    total_replicas: int
    runs_by_model: Dict[str, int]


class APIResponse(BaseModel):
    """Generic API response model"""
    success: bool = True
    message: str
    data: Optional[dict] = None
