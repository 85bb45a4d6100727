from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# --- model zoo parameters -------------------------------------------------


class GrowthParams(StrictModel):
    n_final: int = Field(default=100, ge=1)
    links_per_node: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_sizes(self):
        if self.n_final < self.links_per_node:
            raise ValueError("n_final must be >= links_per_node")
        if self.n_final < self.links_per_node + 1:
            raise ValueError(f"n_final must be >= the seed clique size {self.links_per_node + 1}")
        return self


class CaParams(StrictModel):
    width: int = Field(default=20, ge=3)
    height: int = Field(default=20, ge=3)
    density: float = Field(default=0.5, ge=0.0, le=1.0)


class RbnParams(StrictModel):
    n: int = Field(default=30, ge=1)
    k: int = Field(default=2, ge=0)
    rule: Literal["random", "identity", "constant"] = "random"

    @model_validator(mode="after")
    def _check_in_degree(self):
        if self.k > self.n - 1:
            raise ValueError(f"k={self.k} exceeds n-1={self.n - 1}")
        if self.rule == "identity" and self.k < 1:
            raise ValueError("identity rules need at least one input")
        return self


class DegreeStateParams(StrictModel):
    n_final: int = Field(default=200, ge=3)
    modulation: float = Field(default=3.0, ge=0.0, le=9.0)
    red_prob: float = Field(default=0.5, ge=0.0, le=1.0)
    recolor_prob: float = Field(default=0.2, ge=0.0, le=1.0)
    state_weights: dict[str, float] | None = None


class StateBasedParams(StrictModel):
    n_initial: int = Field(default=10, ge=2)
    newcomer_rate: float = Field(default=0.1, ge=0.0, le=1.0)
    red_prob: float = Field(default=0.3, ge=0.0, le=1.0)


class ForestFireParams(StrictModel):
    n_final: int = Field(default=200, ge=3)
    burn_prob: float = Field(default=0.35, ge=0.0, le=0.99)
    ambassadors: int = Field(default=1, ge=1)


class ModelSpec(StrictModel):
    model: str
    params: dict = Field(default_factory=dict)


class ModelInfo(BaseModel):
    name: str
    description: str
    params: dict = Field(default_factory=dict)


# --- operational network scenarios ---------------------------------------


class ScenarioAgent(StrictModel):
    id: str
    sigma: list[str | int | float | bool]
    knowledge: dict[str, str | int | float | bool] = Field(default_factory=dict)


class ScenarioEvent(StrictModel):
    name: str = ""
    conditions: str | None = None
    source: str
    destination: str
    link_type: Literal["Request", "Flow", "Task"]
    knowledge_required: list[str] = Field(default_factory=list)
    knowledge_transferred: list[str] = Field(default_factory=list)
    duration: int = Field(default=1, ge=1)
    duration_variation: int = Field(default=0, ge=0)


class Scenario(StrictModel):
    name: str = "scenario"
    heterotype_prefix: int = Field(default=3, ge=1)
    agents: list[ScenarioAgent]
    standby: list[tuple[str, str]] = Field(default_factory=list)
    events: list[ScenarioEvent] = Field(default_factory=list)

    @field_validator("agents")
    @classmethod
    def _unique_agents(cls, agents):
        ids = [a.id for a in agents]
        if len(ids) != len(set(ids)):
            raise ValueError("agent ids must be unique")
        return agents


# --- merger model ---------------------------------------------------------


class MergerParams(StrictModel):
    n: int = Field(default=50, gt=0)
    within_ties: int = Field(default=490, gt=0)
    between_ties: int = Field(default=50, gt=0)
    separation: float = Field(default=3.0, gt=0)
    noise_sd: float = Field(default=0.1, gt=0)
    d_c: float = Field(default=0.5, gt=0)
    w: float = Field(default=1.0, ge=0)
    b: float = Field(default=1.0, ge=0)
    iterations: int = Field(default=200, ge=0)
    runs: int = Field(default=50, gt=0)
    dimensions: int = Field(default=10, gt=0)
    shuffle: bool = False


class MergerSweep(StrictModel):
    w: list[float] = Field(default_factory=lambda: [1.0, 3.0, 5.0, 10.0, 20.0, 30.0])
    b: list[float] = Field(default_factory=lambda: [0.1, 0.5, 1.0, 3.0, 5.0])
    runs: int = Field(default=50, gt=0)
    iterations: int = Field(default=200, ge=0)
    metrics_every: int = Field(default=10, gt=0)
    snapshots: bool = False
    overrides: dict = Field(default_factory=dict)


# --- experiments ----------------------------------------------------------


class ExperimentConfig(StrictModel):
    kind: Literal["simulate", "discover", "opnet", "merger", "analyze"]
    seed: int | None = None
    model: str | None = None
    params: dict = Field(default_factory=dict)
    steps: int | None = Field(default=None, ge=0)
    iterations: int | None = Field(default=None, ge=0)
    trace: str | None = None
    graphml: list[str] = Field(default_factory=list)
    scenario: str | None = None
    sweep: MergerSweep | None = None
    inputs: list[str] = Field(default_factory=list)
    mode: Literal["deterministic", "stochastic"] = "deterministic"
    candidates: list[str] | None = None
    max_ticks: int = Field(default=1000, gt=0)
    format: Literal["snapshot", "csv"] = "snapshot"
    out: str | None = None


class JobResponse(BaseModel):
    job_id: str
    kind: str
    status: str
    artifacts: list[str] = Field(default_factory=list)
    error: str | None = None
    created_at: str = ""
    completed_at: str | None = None
