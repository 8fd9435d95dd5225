"""Derive router - exposes the derived compatibility system and its checksums."""

import logging

from fastapi import APIRouter, HTTPException
from fastapi.responses import PlainTextResponse

from geodrat.errors import DerivationMismatchError
from geodrat.models.schemas import RunReport
from geodrat.services import pipeline
from geodrat.services.derivation import derived_system, dump_system

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/derive", tags=["derive"])


@router.get("", response_model=RunReport)
async def get_derivation() -> RunReport:
    try:
        return pipeline.derive()
    except DerivationMismatchError as exc:
        logger.warning("Derived system does not match its checksums: %s", exc)
        raise HTTPException(status_code=500, detail=str(exc))


@router.get("/dump", response_class=PlainTextResponse)
async def get_dump() -> str:
    """The derived system as plain text, one term per line."""
    return dump_system(derived_system())
