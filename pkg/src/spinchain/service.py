"""HTTP face of the toolkit.

Endpoints wrap the config-driven runners one to one:

* ``GET  /health``    -- liveness probe,
* ``POST /simulate``  -- propagate a configured control, return CSV bodies,
* ``POST /optimize``  -- run the projected-gradient or genetic optimizer,
* ``POST /verify``    -- run the analytic oracle suite.

Schema violations surface as 422 through pydantic; solver failures and
non-finite objectives map to 500 with a structured detail message.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .dynamics import PropagationError
from .runner import ConfigurationError, run_optimize, run_simulate, run_verify
from .schemas import (
    OptimizeResponse,
    RunConfig,
    SimulateResponse,
    VerifyRequest,
    VerifyResponse,
)

__all__ = ["app", "OptimizeRequest"]


class OptimizeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: RunConfig
    restarts: int = Field(default=1, ge=1)


app = FastAPI(title="spinchain control service", version=__version__)


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/simulate", response_model=SimulateResponse)
def simulate(config: RunConfig) -> SimulateResponse:
    try:
        return run_simulate(config)
    except ConfigurationError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except (PropagationError, FloatingPointError) as exc:
        raise HTTPException(status_code=500, detail=f"solver failure: {exc}") from exc


@app.post("/optimize", response_model=OptimizeResponse)
def optimize(request: OptimizeRequest) -> OptimizeResponse:
    try:
        return run_optimize(request.config, restarts=request.restarts)
    except ConfigurationError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except (PropagationError, FloatingPointError) as exc:
        raise HTTPException(status_code=500, detail=f"solver failure: {exc}") from exc


@app.post("/verify", response_model=VerifyResponse)
def verify(request: VerifyRequest) -> VerifyResponse:
    return run_verify(request)
