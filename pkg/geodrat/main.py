from collections.abc import AsyncGenerator
from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from geodrat import __version__
from geodrat.config import settings
from geodrat.routers.analyze import router as analyze_router
from geodrat.routers.derive import router as derive_router
from geodrat.routers.examples import router as examples_router
from geodrat.routers.verify import router as verify_router
from geodrat.services.derivation import derived_system


@asynccontextmanager
async def lifespan(_app: FastAPI) -> AsyncGenerator[None]:
    # the first derivation takes seconds; pay it before the first request
    derived_system()
    yield


app = FastAPI(title=settings.app_name, version=__version__, lifespan=lifespan)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(analyze_router)
app.include_router(verify_router)
app.include_router(derive_router)
app.include_router(examples_router)


@app.get("/")
async def index() -> dict:
    return {"tool": settings.app_name, "version": __version__}


if __name__ == "__main__":
    import uvicorn

    uvicorn.run("geodrat.main:app", host="0.0.0.0", port=settings.port, reload=True)
