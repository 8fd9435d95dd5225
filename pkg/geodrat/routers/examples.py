"""Examples router - lists the built-in metric registry."""

from fastapi import APIRouter, HTTPException

from geodrat.errors import ConfigError
from geodrat.models.schemas import ExampleEntry
from geodrat.services.examples import EXAMPLES, get_example

router = APIRouter(prefix="/api/examples", tags=["examples"])


@router.get("", response_model=list[ExampleEntry])
async def list_examples() -> list[ExampleEntry]:
    return list(EXAMPLES.values())


@router.get("/{name}", response_model=ExampleEntry)
async def get_one(name: str) -> ExampleEntry:
    try:
        return get_example(name)
    except ConfigError as exc:
        raise HTTPException(status_code=404, detail=str(exc))
