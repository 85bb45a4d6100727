from slowapi import Limiter
from slowapi.util import get_remote_address
from starlette.requests import Request

from app.core.canonical import digest


def _client_key(request: Request) -> str:
    """Bucket authenticated callers by key fingerprint, anonymous ones by address."""
    key = request.headers.get("X-Service-Key")
    if key:
        return "key:" + digest(key)[:16]
    return get_remote_address(request) or "127.0.0.1"


limiter = Limiter(key_func=_client_key)
