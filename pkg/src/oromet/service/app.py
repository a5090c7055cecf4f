"""FastAPI application exposing extract / analyze / synth / validate."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import OrometError, UnknownScenario
from ..pipeline import cmd_analyze, cmd_extract, cmd_synth, cmd_validate_manifest
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    ExtractRequest,
    ExtractResponse,
    HealthResponse,
    SynthRequest,
    SynthResponse,
    ValidateRequest,
    ValidateResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="oromet", version=__version__,
                  description="Acoustic and orofacial speech metrics service")

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/extract", response_model=ExtractResponse)
    def extract(req: ExtractRequest) -> ExtractResponse:
        try:
            result = cmd_extract(req.manifests, req.out_dir,
                                 req.config.to_run_config())
        except OrometError as exc:
            raise HTTPException(status_code=422, detail={
                "error": type(exc).__name__, "message": str(exc)}) from exc
        return ExtractResponse(**result)

    @app.post("/analyze", response_model=AnalyzeResponse)
    def analyze(req: AnalyzeRequest) -> AnalyzeResponse:
        try:
            result = cmd_analyze(req.metrics_csv, req.subjects_csv,
                                 req.out_dir, req.config.to_run_config())
        except (OrometError, FileNotFoundError) as exc:
            raise HTTPException(status_code=422, detail={
                "error": type(exc).__name__, "message": str(exc)}) from exc
        return AnalyzeResponse(**result)

    @app.post("/synth", response_model=SynthResponse)
    def synth(req: SynthRequest) -> SynthResponse:
        try:
            result = cmd_synth(req.scenario, req.out_dir, seed=req.seed,
                               params=req.params)
        except UnknownScenario as exc:
            raise HTTPException(status_code=422, detail={
                "error": "UnknownScenario", "message": str(exc)}) from exc
        return SynthResponse(scenario=result["scenario"], outdir=result["outdir"],
                             manifests=result["manifests"],
                             truth_path=result["truth_path"])

    @app.post("/validate-manifest", response_model=ValidateResponse)
    def validate(req: ValidateRequest) -> ValidateResponse:
        return ValidateResponse(**cmd_validate_manifest(req.path))

    return app
