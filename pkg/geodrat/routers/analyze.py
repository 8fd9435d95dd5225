"""Analyze router - runs the integrability criterion on a metric."""

import logging

from fastapi import APIRouter, HTTPException, Response
from fastapi.concurrency import run_in_threadpool
from pydantic import ValidationError

from geodrat.errors import ConfigError, GeodratError
from geodrat.models.schemas import AnalyzeRequest, RunReport
from geodrat.services import pipeline

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api", tags=["analyze"])


def _json(report: RunReport) -> Response:
    # pydantic writes NaN drifts as null; the stdlib encoder would reject them
    return Response(content=report.model_dump_json(), media_type="application/json")


@router.post("/analyze", response_model=RunReport)
async def analyze_metric(body: AnalyzeRequest) -> Response:
    """Decide whether the metric admits a fractional-linear integral.

    The numerical work runs in the thread pool; an inconclusive verdict is a
    normal 200 response.
    """
    try:
        config = body.to_config()
    except ValidationError as exc:
        raise HTTPException(status_code=422, detail=str(exc))

    try:
        report = await run_in_threadpool(pipeline.analyze, config)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    except GeodratError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    except Exception:
        logger.exception("Analysis failed")
        raise HTTPException(status_code=500, detail="Analysis failed")

    logger.info("Analyze finished with verdict '%s'", report.result.verdict)
    return _json(report)
