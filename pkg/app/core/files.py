"""Config file loading and atomic artifact writes."""

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import TypeVar

import yaml
from pydantic import BaseModel, ValidationError

from app.core.errors import ConfigError, OutputPathError

logger = logging.getLogger("workbench.files")

M = TypeVar("M", bound=BaseModel)


def describe_validation(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        where = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{where}: {err['msg']}")
    return "; ".join(parts)


def validate(schema: type[M], data, source: str = "config") -> M:
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: expected a mapping at the top level")
    try:
        return schema(**data)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {describe_validation(exc)}") from exc


def read_document(path: str | Path) -> dict:
    """Read a YAML or JSON document (JSON is valid YAML)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text) if path.suffix != ".json" else json.loads(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return data if data is not None else {}


def load_model(path: str | Path, schema: type[M]) -> M:
    return validate(schema, read_document(path), source=str(path))


def atomic_write(path: str | Path, content: str | bytes) -> Path:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        data = content.encode("utf-8") if isinstance(content, str) else content
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OutputPathError(f"cannot write {path}: {exc.strerror or exc}") from exc
    logger.debug("Wrote %s (%d bytes)", path, len(data))
    return path
