import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from slowapi import _rate_limit_exceeded_handler
from slowapi.errors import RateLimitExceeded
from slowapi.middleware import SlowAPIMiddleware

from app import __version__
from app.api import api_router
from app.core.config import get_settings
from app.core.jobs import JobManager
from app.core.rate_limit import limiter
from app.core.zoo import MODEL_REGISTRY

logger = logging.getLogger("workbench")

SERVICE = "gna-workbench"


@asynccontextmanager
async def lifespan(application: FastAPI):
    settings = get_settings()
    logging.basicConfig(
        level=logging.DEBUG if settings.DEBUG else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    logger.info("Workbench starting up (env=%s, output=%s)", settings.ENVIRONMENT, settings.OUTPUT_DIR)
    application.state.job_manager = JobManager(settings.OUTPUT_DIR)

    yield

    pending = [j for j in application.state.job_manager.jobs.values() if j.status == "processing"]
    if pending:
        logger.warning("Shutting down with %d experiment(s) still running", len(pending))
    logger.info("Workbench shutting down")


app = FastAPI(
    title="GNA Workbench",
    version=__version__,
    lifespan=lifespan,
)

# Rate limiting
app.state.limiter = limiter
app.add_exception_handler(RateLimitExceeded, _rate_limit_exceeded_handler)
app.add_middleware(SlowAPIMiddleware)

# CORS
settings = get_settings()
origins = [o.strip() for o in settings.CORS_ORIGINS.split(",") if o.strip()]
app.add_middleware(
    CORSMiddleware,
    allow_origins=origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
    expose_headers=[
        "X-RateLimit-Limit",
        "X-RateLimit-Remaining",
        "X-RateLimit-Reset",
        "Retry-After",
    ],
)

app.include_router(api_router)


@app.get("/")
async def root():
    return {"service": SERVICE, "version": __version__}


@app.get("/health")
async def health():
    jm = getattr(app.state, "job_manager", None)
    jobs = list(jm.jobs.values()) if jm else []
    return {
        "status": "healthy",
        "service": SERVICE,
        "models": sorted(MODEL_REGISTRY),
        "jobs": len(jobs),
        "running": sum(1 for j in jobs if j.status == "processing"),
    }
