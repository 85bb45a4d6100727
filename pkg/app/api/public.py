from fastapi import APIRouter, HTTPException, Request

from app.core.config import get_settings
from app.core.errors import ConfigError
from app.core.rate_limit import limiter
from app.core.zoo import get_entry, list_models
from app.models.schemas import ModelInfo

router = APIRouter()


@router.get("/models", response_model=list[ModelInfo])
@limiter.limit(lambda: get_settings().RATE_LIMIT_PUBLIC)
async def models(request: Request):
    return list_models()


@router.get("/models/{name}", response_model=ModelInfo)
@limiter.limit(lambda: get_settings().RATE_LIMIT_PUBLIC)
async def model_detail(request: Request, name: str):
    try:
        entry = get_entry(name)
    except ConfigError as exc:
        raise HTTPException(status_code=404, detail=str(exc))
    return ModelInfo(name=entry.name, description=entry.description, params=entry.params().model_dump())
