from fastapi import FastAPI
from starlette.middleware.cors import CORSMiddleware

from . import __version__
from .config import settings
from .routers import imitator, inference, presets
from .utils import setup_logging

setup_logging(settings.LOG_LEVEL)

app = FastAPI(title="pvnext", version=__version__)
app.include_router(presets.router, prefix="/presets", tags=["presets"])
app.include_router(imitator.router, prefix="/imitator", tags=["imitator"])
app.include_router(inference.router, prefix="/inference", tags=["inference"])

# Middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=False,
    allow_methods=["GET", "POST"],
    allow_headers=["*"],
)


@app.get("/")
async def root():
    return {"message": "pvnext is running", "version": __version__}
