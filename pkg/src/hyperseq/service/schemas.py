"""Request and response models for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field


class ApiModel(BaseModel):
    # Several schemas carry model_* field names; silence pydantic's
    # protected-namespace collision for the whole service.
    model_config = ConfigDict(protected_namespaces=())


class HealthResponse(ApiModel):
    status: str
    version: str


class ModelConfigSchema(ApiModel):
    dim: int = Field(ge=64)
    n: int = Field(default=3, ge=2, le=255)
    shift: int = Field(default=4, ge=1, le=255)
    seed: int = Field(default=0, ge=0)
    adaptive: bool = False
    adapt_weight: int = Field(default=1, ge=1)
    entry_bits: Literal[8, 16, 32] = 16


class SessionIn(ApiModel):
    user: str = Field(min_length=1)
    session: int = Field(ge=0)
    states: list[str] = Field(min_length=1)


class TrainRequest(ApiModel):
    config: ModelConfigSchema
    sessions: list[SessionIn] = Field(min_length=1)


class TrainResponse(ApiModel):
    model_id: str
    train_ngram_count: int
    labels: list[str]


class ModelInfo(ApiModel):
    model_id: str
    config: ModelConfigSchema
    labels: list[str]
    train_ngram_count: int
    adapt_event_count: int
    adapted_users: list[str]


class ModelList(ApiModel):
    models: list[ModelInfo]


class PredictRequest(ApiModel):
    prefix: list[str] = Field(min_length=1)
    user: str | None = None


class PredictResponse(ApiModel):
    predicted: str
    scores: dict[str, float]
    user_specific: bool


class AdaptRequest(ApiModel):
    window: list[str] = Field(min_length=1)
    user: str | None = None


class AdaptResponse(ApiModel):
    model_id: str
    user: str | None
    adapt_event_count: int


class MarkovSpecSchema(ApiModel):
    labels: list[str] = Field(min_length=1)
    initial: list[float]
    transition: list[list[float]]


class GenerateRequest(ApiModel):
    spec: MarkovSpecSchema | None = None
    users: int = Field(default=21, ge=1)
    sessions_per_user: int = Field(default=5, ge=1)
    session_len: int = Field(default=100, ge=1)
    seed: int = 0
    per_user_perturbation: float = Field(default=0.0, ge=0.0, le=1.0)


class GenerateResponse(ApiModel):
    sessions: list[SessionIn]
    labels: list[str]


class EvaluateRequest(ApiModel):
    sessions: list[SessionIn] = Field(min_length=1)
    adaptive: bool = False
    window: int = Field(default=30, ge=1)


class EvaluateResponse(ApiModel):
    overall_accuracy: float
    per_user_accuracy: dict[str, float]
    events: int
    skipped_sessions: int
    sliding: dict[str, list[tuple[int, float]]] | None = None
