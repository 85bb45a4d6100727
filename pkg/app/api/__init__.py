from fastapi import APIRouter

from app.api.experiments import router as experiments_router
from app.api.public import router as public_router

api_router = APIRouter(prefix="/api/v1")
api_router.include_router(public_router)
api_router.include_router(experiments_router)
