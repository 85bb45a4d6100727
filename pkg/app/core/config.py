from functools import lru_cache

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    SERVICE_API_KEY: str = ""
    DATA_DIR: str = "./data"
    OUTPUT_DIR: str = "./runs"
    ENVIRONMENT: str = "development"
    DEBUG: bool = False
    PORT: int = 8080
    WORKERS: int = 1
    MAX_STEPS: int = 20000
    POWERLAW_XMIN: int = 5
    CANONICAL_EXACT_LIMIT: int = 40320
    SELECTION_CRITERION: str = "likelihood"
    RATE_LIMIT_PUBLIC: str = "60/minute"
    RATE_LIMIT_AUTH_READ: str = "300/minute"
    RATE_LIMIT_AUTH_WRITE: str = "30/minute"
    CORS_ORIGINS: str = "*"

    model_config = {"env_file": ".env", "extra": "ignore"}


@lru_cache()
def get_settings() -> Settings:
    return Settings()
