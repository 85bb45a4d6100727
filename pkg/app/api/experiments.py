from fastapi import APIRouter, BackgroundTasks, Body, Depends, HTTPException, Request
from fastapi.responses import FileResponse

from app.core.auth import verify_service_key
from app.core.config import get_settings
from app.core.errors import ConfigError
from app.core.experiments import KINDS, load_experiment
from app.core.jobs import JobManager
from app.core.rate_limit import limiter
from app.models.schemas import JobResponse

router = APIRouter(dependencies=[Depends(verify_service_key)])

SEEDED_KINDS = ("simulate", "opnet", "merger")


async def get_job_manager(request: Request) -> JobManager:
    jm = getattr(request.app.state, "job_manager", None)
    if jm is None:
        raise HTTPException(status_code=503, detail="Job manager not available")
    return jm


@router.post("/experiments/{kind}", response_model=JobResponse, status_code=202)
@limiter.limit(lambda: get_settings().RATE_LIMIT_AUTH_WRITE)
async def submit_experiment(
    request: Request,
    kind: str,
    background_tasks: BackgroundTasks,
    body: dict | None = Body(default=None),
    jm: JobManager = Depends(get_job_manager),
):
    if kind not in KINDS:
        raise HTTPException(status_code=404, detail=f"Unknown experiment kind: {kind}")
    body = dict(body or {})
    # Output location is owned by the job manager.
    body.pop("out", None)
    try:
        config = load_experiment(None, kind, body)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    if kind in SEEDED_KINDS and config.seed is None:
        raise HTTPException(status_code=400, detail=f"{kind}: an explicit seed is required")
    job = jm.create_job(config)
    background_tasks.add_task(jm.process_job, job)
    return job.to_dict()


@router.get("/jobs/{job_id}", response_model=JobResponse)
@limiter.limit(lambda: get_settings().RATE_LIMIT_AUTH_READ)
async def get_job(request: Request, job_id: str, jm: JobManager = Depends(get_job_manager)):
    job = jm.get_job(job_id)
    if not job:
        raise HTTPException(status_code=404, detail="Job not found")
    return job.to_dict()


@router.get("/jobs/{job_id}/artifacts/{name:path}")
@limiter.limit(lambda: get_settings().RATE_LIMIT_AUTH_READ)
async def get_artifact(request: Request, job_id: str, name: str, jm: JobManager = Depends(get_job_manager)):
    job = jm.get_job(job_id)
    if not job:
        raise HTTPException(status_code=404, detail="Job not found")
    if name not in job.artifacts:
        raise HTTPException(status_code=404, detail="Artifact not found")
    return FileResponse(job.out_dir / name)
