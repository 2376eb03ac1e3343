"""
Atomic artifact writes: text goes to a temp file in the target directory and is
moved into place with os.replace, so readers never see a half-written file.
"""
import logging
import os
import tempfile
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Union

from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.txt"


@retry(
    stop=stop_after_attempt(3),
    wait=wait_exponential(multiplier=1, min=2, max=10),
    retry=retry_if_exception_type(PermissionError),
    reraise=True
)
def _replace(source: str, target: Path) -> None:
    # Windows can refuse the rename while a reader holds the target open
    os.replace(source, target)


def atomic_write_text(path: Union[str, Path], text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        _replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug(f"Wrote {path}")
    return path


def _flatten(prefix: str, value: Any, out: Dict[str, str]) -> None:
    if isinstance(value, Mapping):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(value, Enum):
        out[prefix] = str(value.value)
    elif isinstance(value, (list, tuple)):
        out[prefix] = ",".join(str(v) for v in value)
    elif isinstance(value, float):
        out[prefix] = format(value, ".17g")
    elif value is None:
        out[prefix] = "none"
    else:
        out[prefix] = str(value)


def format_manifest(config: Mapping[str, Any]) -> str:
    """`key = value` lines, nested keys dotted, sorted by key."""
    flat: Dict[str, str] = {}
    _flatten("", config, flat)
    return "".join(f"{k} = {flat[k]}\n" for k in sorted(flat))


def write_manifest(out_dir: Union[str, Path], config: Mapping[str, Any]) -> Path:
    return atomic_write_text(Path(out_dir) / MANIFEST_NAME, format_manifest(config))
