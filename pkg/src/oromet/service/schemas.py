"""Pydantic request/response models for the service endpoints."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..pipeline import RunConfig


class ConfigModel(BaseModel):
    """Optional overrides of the run configuration."""

    f_min: float | None = None
    f_max: float | None = None
    voicing_threshold: float | None = None
    vad_margin_db: float | None = None
    min_pause: float | None = None
    min_speech: float | None = None
    ear_threshold: float | None = None
    blink_debounce: int | None = None
    alpha: float | None = None
    seed: int | None = None
    bootstrap_ci: bool | None = None
    impute: bool | None = None
    sit_words: dict[int, int] | None = None

    def to_run_config(self) -> RunConfig:
        overrides = {k: v for k, v in self.model_dump().items() if v is not None}
        return RunConfig(**overrides)


class ExtractRequest(BaseModel):
    manifests: list[str] = Field(min_length=1)
    out_dir: str
    config: ConfigModel = Field(default_factory=ConfigModel)


class ExtractResponse(BaseModel):
    metrics_csv: str
    subjects_csv: str
    errors_json: str
    n_subjects: int
    n_utterances_ok: int
    n_utterances_failed: int
    n_rows: int
    config_hash: str


class AnalyzeRequest(BaseModel):
    metrics_csv: str
    subjects_csv: str
    out_dir: str
    config: ConfigModel = Field(default_factory=ConfigModel)


class AnalyzeResponse(BaseModel):
    out_dir: str
    config_hash: str
    n_subjects: int
    stages: dict
    degenerate_zscore_groups: list[dict]
    version: str


class SynthRequest(BaseModel):
    scenario: str
    out_dir: str
    seed: int = 0
    params: dict = Field(default_factory=dict)


class SynthResponse(BaseModel):
    scenario: str
    outdir: str
    manifests: list[str]
    truth_path: str


class ValidateRequest(BaseModel):
    path: str


class ValidateResponse(BaseModel):
    valid: bool
    path: str
    error: str | None = None
    message: str | None = None
    subject_id: str | None = None
    cohort: str | None = None
    n_utterances: int | None = None
    tasks: list[str] | None = None


class HealthResponse(BaseModel):
    status: str
    version: str
