import hmac

from fastapi import Header, HTTPException

from app.core.config import get_settings


def _check(key: str) -> str:
    expected = get_settings().SERVICE_API_KEY
    if not expected:
        raise HTTPException(status_code=503, detail="Service key not configured")
    if not hmac.compare_digest(key, expected):
        raise HTTPException(status_code=403, detail="Invalid service key")
    return key


async def verify_service_key(
    x_service_key: str = Header(..., alias="X-Service-Key"),
) -> str:
    """Guard for endpoints that start experiments or read their results."""
    return _check(x_service_key)
