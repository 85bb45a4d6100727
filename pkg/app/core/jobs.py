import asyncio
import logging
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from app.core.errors import WorkbenchError
from app.core.experiments import run_experiment
from app.models.schemas import ExperimentConfig

logger = logging.getLogger("workbench.jobs")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class Job:
    id: str
    config: ExperimentConfig
    out_dir: Path
    status: str = "pending"  # pending, processing, completed, failed
    artifacts: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    error: str | None = None
    exit_code: int | None = None
    created_at: str = ""
    completed_at: str | None = None

    @property
    def kind(self) -> str:
        return self.config.kind

    def to_dict(self) -> dict:
        return {
            "job_id": self.id,
            "kind": self.kind,
            "status": self.status,
            "artifacts": self.artifacts,
            "error": self.error,
            "created_at": self.created_at,
            "completed_at": self.completed_at,
        }


class JobManager:
    """Tracks experiment jobs submitted over the API.

    Runs execute in a worker thread so the event loop keeps serving status
    requests; each job writes into its own directory under ``output_dir``.
    """

    def __init__(self, output_dir: str | Path):
        self.output_dir = Path(output_dir)
        self.jobs: dict[str, Job] = {}

    def create_job(self, config: ExperimentConfig) -> Job:
        job_id = str(uuid.uuid4())
        job = Job(
            id=job_id,
            config=config,
            out_dir=self.output_dir / job_id,
            created_at=_now(),
        )
        self.jobs[job.id] = job
        logger.info("Job %s created (%s)", job.id, job.kind)
        return job

    def get_job(self, job_id: str) -> Job | None:
        return self.jobs.get(job_id)

    async def process_job(self, job: Job):
        job.status = "processing"
        try:
            result = await asyncio.to_thread(run_experiment, job.config, job.out_dir)
            job.artifacts = sorted(result.artifacts)
            job.summary = result.summary
            job.status = "completed"
            job.completed_at = _now()
            logger.info("Job %s completed: %d artifacts in %s", job.id, len(job.artifacts), job.out_dir)
        except WorkbenchError as e:
            job.status = "failed"
            job.error = str(e) or repr(e)
            job.exit_code = e.exit_code
            job.completed_at = _now()
            logger.warning("Job %s failed: %s", job.id, job.error)
        except Exception as e:
            job.status = "failed"
            job.error = str(e) or repr(e)
            job.exit_code = 1
            job.completed_at = _now()
            logger.error("Job %s failed: %s", job.id, job.error, exc_info=True)
