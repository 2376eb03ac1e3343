# fields.py
import logging
from pathlib import Path
from typing import Union

import numpy as np

from src.plaplab.exceptions import FieldError
from src.plaplab.fileio import atomic_write_text

logger = logging.getLogger(__name__)


def format_field(values: np.ndarray) -> str:
    """One `<index> <value>` line per vertex, 17 significant digits."""
    return "".join(f"{k} {format(float(v), '.17g')}\n" for k, v in enumerate(np.asarray(values, dtype=float)))


def parse_field(text: str, n: int = None) -> np.ndarray:
    values = {}
    for line_number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise FieldError(f"line {line_number}: expected '<index> <value>'", {"line_number": line_number})
        try:
            k, v = int(tokens[0]), float(tokens[1])
        except ValueError as e:
            raise FieldError(f"line {line_number}: {e}", {"line_number": line_number}) from e
        if k in values:
            raise FieldError(f"line {line_number}: index {k} repeated", {"line_number": line_number})
        values[k] = v
    size = len(values) if n is None else n
    missing = [k for k in range(size) if k not in values]
    if missing or len(values) != size:
        raise FieldError(f"Field is not dense on 0..{size - 1}", {"missing": missing[:10], "n": size})
    return np.array([values[k] for k in range(size)], dtype=float)


def read_field(path: Union[str, Path], n: int = None) -> np.ndarray:
    logger.debug(f"Reading field from {path}")
    return parse_field(Path(path).read_text(encoding="utf-8"), n)


def write_field(path: Union[str, Path], values: np.ndarray) -> Path:
    return atomic_write_text(path, format_field(values))
