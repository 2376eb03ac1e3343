# parser.py
import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

from src.plaplab.exceptions import SpaceError, SpaceParseError
from src.plaplab.space.mms import DiscreteMMS, build_space

logger = logging.getLogger(__name__)

HEADER = "# plaplab space: v <index> <measure> / e <i> <j> <conductance> <length>"


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def parse_space(text: str) -> DiscreteMMS:
    """
    Parse the line-oriented space format.

    `v <index> <measure>` records come first, then `e <i> <j> <conductance> <length>`.
    Blank lines and anything after `#` are ignored. Indices are 0-based and must be dense.
    """
    measure: Dict[int, float] = {}
    edges: List[Tuple[int, int, float, float, int]] = []

    for line_number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        tag = tokens[0]
        try:
            if tag == "v":
                if len(tokens) != 3:
                    raise SpaceParseError("vertex record needs 'v <index> <measure>'", line_number)
                index, value = int(tokens[1]), float(tokens[2])
                if index in measure:
                    raise SpaceParseError(f"vertex {index} declared twice", line_number)
                if index < 0:
                    raise SpaceParseError(f"negative vertex index {index}", line_number)
                measure[index] = value
            elif tag == "e":
                if len(tokens) not in (4, 5):
                    raise SpaceParseError("edge record needs 'e <i> <j> <conductance> [<length>]'", line_number)
                length = float(tokens[4]) if len(tokens) == 5 else 1.0
                edges.append((int(tokens[1]), int(tokens[2]), float(tokens[3]), length, line_number))
            else:
                raise SpaceParseError(f"unknown record type '{tag}'", line_number)
        except ValueError as e:
            raise SpaceParseError(f"malformed number in '{raw.strip()}' ({e})", line_number) from e

    n = len(measure)
    if n == 0:
        raise SpaceParseError("no vertex records", 0)
    for x in range(n):
        if x not in measure:
            raise SpaceError(f"Missing measure entry for vertex {x}", {"vertex": x})

    for i, j, _, _, line_number in edges:
        for x in (i, j):
            if not 0 <= x < n:
                raise SpaceParseError(f"edge references vertex {x} but only {n} vertices are declared",
                                      line_number, {"vertex": x, "n": n})
    try:
        return build_space([(i, j, w, l) for i, j, w, l, _ in edges], measure, n=n)
    except SpaceError as e:
        edge = e.context.get("edge")
        if edge is not None:
            key = tuple(sorted(edge[:2]))
            for i, j, _, _, line_number in edges:
                if tuple(sorted((i, j))) == key:
                    raise SpaceParseError(str(e), line_number, e.context) from e
        raise


def serialize_space(space: DiscreteMMS) -> str:
    """Canonical form: vertices in index order, edges lexicographic, 17 significant digits."""
    lines = [HEADER]
    lines.extend(f"v {x} {fmt(m)}" for x, m in enumerate(space.measure))
    lines.extend(f"e {i} {j} {fmt(w)} {fmt(l)}" for i, j, w, l in space.edge_list())
    return "\n".join(lines) + "\n"


def read_space(path: Union[str, Path]) -> DiscreteMMS:
    text = Path(path).read_text(encoding="utf-8")
    logger.debug(f"Reading space from {path}")
    return parse_space(text)
