"""Request/response schemas for the HTTP service."""

from __future__ import annotations

from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ConstraintModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    module: str
    target: str
    exclusive: bool = False


class ScenarioRunSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: str
    config: int = 1
    variant: Optional[str] = None
    placement: str = "edgeward"
    duration_ms: Optional[float] = Field(default=None, gt=0)
    seed: Optional[int] = 0
    distribution: Optional[str] = None
    ggs_period_ms: Optional[float] = Field(default=None, gt=0)


class CustomRunSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    topology: dict
    app: dict
    constraints: List[ConstraintModel] = Field(default_factory=list)
    placement: str = "edgeward"
    duration_ms: float = Field(gt=0)
    seed: Optional[int] = 0
    distribution: Optional[str] = None


class RunRequest(BaseModel):
    """Exactly one of scenario / custom must be provided."""

    model_config = ConfigDict(extra="forbid")

    scenario: Optional[ScenarioRunSpec] = None
    custom: Optional[CustomRunSpec] = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.scenario is None) == (self.custom is None):
            raise ValueError("provide exactly one of 'scenario' or 'custom'")
        return self


class RunResponse(BaseModel):
    report: dict
    wall_ms: float


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: str
    configs: List[int]
    placements: List[str] = Field(default_factory=lambda: ["cloud", "edgeward"])
    variants: Optional[List[str]] = None
    duration_ms: Optional[float] = Field(default=None, gt=0)
    seed: Optional[int] = 0
    distribution: Optional[str] = None
    ggs_period_ms: Optional[float] = Field(default=None, gt=0)
    jobs: int = Field(default=1, ge=1, le=64)


class SweepFailure(BaseModel):
    scenario: str
    config: int
    variant: str
    placement: str
    error: str


class SweepResponse(BaseModel):
    rows: List[dict]
    failures: List[SweepFailure]


class ValidateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    topology: dict
    app: dict
    constraints: List[ConstraintModel] = Field(default_factory=list)
    placement: Optional[str] = None  # also dry-run this policy when set


class ValidateResponse(BaseModel):
    valid: bool
    violations: List[str]
    warnings: List[str]


class ScenarioInfo(BaseModel):
    name: str
    description: str
    configs: List[int]
    variants: List[str]
    default_duration_ms: float


class ScenariosResponse(BaseModel):
    scenarios: List[ScenarioInfo]


class ErrorBody(BaseModel):
    code: str
    message: str
    details: List[str] = Field(default_factory=list)


class ErrorResponse(BaseModel):
    error: ErrorBody
