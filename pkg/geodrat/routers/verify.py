"""Verify router - checks a candidate integral along a batch of geodesics."""

import logging

from fastapi import APIRouter, HTTPException, Response
from fastapi.concurrency import run_in_threadpool
from pydantic import ValidationError

from geodrat.errors import ConfigError, GeodratError
from geodrat.models.schemas import RunConfig, RunReport, VerifyRequest
from geodrat.services import pipeline

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api", tags=["verify"])


def _json(report: RunReport) -> Response:
    # pydantic writes NaN drifts as null; the stdlib encoder would reject them
    return Response(content=report.model_dump_json(), media_type="application/json")


def _config(body: VerifyRequest) -> RunConfig:
    base = body.to_config()
    return base.model_copy(update={"trajectories": body.trajectories, "t_end": body.t_end, "seed": body.seed})


@router.post("/verify", response_model=RunReport)
async def verify_integral(body: VerifyRequest) -> Response:
    try:
        config = _config(body)
    except ValidationError as exc:
        raise HTTPException(status_code=422, detail=str(exc))

    try:
        report = await run_in_threadpool(pipeline.verify, config, body.integral)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    except GeodratError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    except Exception:
        logger.exception("Verification failed")
        raise HTTPException(status_code=500, detail="Verification failed")

    return _json(report)
