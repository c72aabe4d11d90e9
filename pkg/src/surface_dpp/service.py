"""HTTP service exposing the experiment runner.

The handlers are plain functions so the command-line client can call them
in-process; the FastAPI app is a thin routing layer over them.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .experiments import ConfigError, ExperimentConfig, report_files, run_experiment
from .presets import EXPERIMENT_DESCRIPTIONS, PHI_PRESETS


class RunRequest(BaseModel):
    """One experiment run: id, flat string options, master seed."""

    experiment: str
    options: dict[str, str] = Field(default_factory=dict)
    seed: int = 0


class FilePayload(BaseModel):
    name: str
    content: str


class RunResponse(BaseModel):
    passed: bool
    report: dict
    files: list[FilePayload]


class PresetsResponse(BaseModel):
    experiments: dict[str, str]
    phi_presets: dict[str, str]


class HealthResponse(BaseModel):
    status: str
    version: str


def handle_presets() -> PresetsResponse:
    return PresetsResponse(experiments=EXPERIMENT_DESCRIPTIONS, phi_presets=PHI_PRESETS)


def handle_run(request: RunRequest) -> RunResponse:
    cfg = ExperimentConfig(request.experiment, dict(request.options), seed=request.seed)
    report = run_experiment(cfg)
    files = [FilePayload(name=n, content=c) for n, c in sorted(report_files(report).items())]
    return RunResponse(passed=report.passed, report=report.as_dict(), files=files)


def create_app() -> FastAPI:
    app = FastAPI(title="surface-dpp", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.get("/presets", response_model=PresetsResponse)
    def presets() -> PresetsResponse:
        return handle_presets()

    @app.post("/run", response_model=RunResponse)
    def run(request: RunRequest) -> RunResponse:
        try:
            return handle_run(request)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=500, detail=f"numerical failure: {exc}")

    return app
