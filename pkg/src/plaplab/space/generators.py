import logging
from typing import Callable, Dict, List, Optional

import numpy as np

from src.plaplab.exceptions import SpaceError
from src.plaplab.space.mms import DiscreteMMS, build_space

logger = logging.getLogger(__name__)


def _require(value: int, minimum: int, what: str) -> int:
    value = int(value)
    if value < minimum:
        raise SpaceError(f"{what} must be at least {minimum}, got {value}", {what: value})
    return value


def _assemble(n: int, pairs: List[tuple], conductance: float, length: float,
              measure: Optional[np.ndarray]) -> DiscreteMMS:
    m = np.ones(n) if measure is None else np.asarray(measure, dtype=float)
    return build_space([(i, j, conductance, length) for i, j in pairs], m)


# -----------------------------------------------------------------------------
# Canonical families
# -----------------------------------------------------------------------------

def path(n: int, conductance: float = 1.0, length: float = 1.0, measure=None) -> DiscreteMMS:
    n = _require(n, 1, "n")
    return _assemble(n, [(i, i + 1) for i in range(n - 1)], conductance, length, measure)


def cycle(n: int, conductance: float = 1.0, length: float = 1.0, measure=None) -> DiscreteMMS:
    n = _require(n, 3, "n")
    pairs = [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]
    return _assemble(n, pairs, conductance, length, measure)


def grid(nx: int, ny: int, conductance: float = 1.0, length: float = 1.0, measure=None) -> DiscreteMMS:
    """Rectangular lattice; vertex (col, row) has index row * nx + col."""
    nx, ny = _require(nx, 1, "nx"), _require(ny, 1, "ny")
    pairs = []
    for row in range(ny):
        for col in range(nx):
            x = row * nx + col
            if col + 1 < nx:
                pairs.append((x, x + 1))
            if row + 1 < ny:
                pairs.append((x, x + nx))
    return _assemble(nx * ny, pairs, conductance, length, measure)


def star(k: int, conductance: float = 1.0, length: float = 1.0, measure=None) -> DiscreteMMS:
    """Center 0 joined to leaves 1..k."""
    k = _require(k, 1, "k")
    return _assemble(k + 1, [(0, i) for i in range(1, k + 1)], conductance, length, measure)


def horn(n: int, exponent: float, conductance: float = 1.0) -> DiscreteMMS:
    """
    Path modeling a weighted cusp: mesh h = 1/n, edge lengths h,
    vertex measure m(i) = ((i + 1) h)**exponent.
    """
    n = _require(n, 1, "n")
    h = 1.0 / n
    measure = ((np.arange(n) + 1) * h) ** float(exponent)
    return _assemble(n, [(i, i + 1) for i in range(n - 1)], conductance, h, measure)


def random_graph(n: int, seed: int = 42, extra: Optional[int] = None) -> DiscreteMMS:
    """
    Seeded random connected graph: a random spanning tree plus `extra`
    chords (default n // 2). Conductances and measures are drawn from [0.5, 2].
    """
    n = _require(n, 1, "n")
    rng = np.random.default_rng(seed)
    pairs = {(int(rng.integers(0, k)), k) for k in range(1, n)}
    extra = n // 2 if extra is None else int(extra)
    candidates = [(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in pairs]
    if candidates and extra > 0:
        pick = rng.choice(len(candidates), size=min(extra, len(candidates)), replace=False)
        pairs.update(candidates[int(c)] for c in pick)
    ordered = sorted(pairs)
    weights = rng.uniform(0.5, 2.0, size=len(ordered))
    measure = rng.uniform(0.5, 2.0, size=n)
    return build_space([(i, j, float(w), 1.0) for (i, j), w in zip(ordered, weights)], measure)


GENERATORS: Dict[str, Callable[..., DiscreteMMS]] = {
    "path": path,
    "cycle": cycle,
    "grid": grid,
    "star": star,
    "horn": horn,
    "random": random_graph,
}


def generate_space(kind: str, *args, **overrides) -> DiscreteMMS:
    if kind not in GENERATORS:
        raise SpaceError(f"Unknown generator '{kind}'", {"kind": kind, "known": sorted(GENERATORS)})
    return GENERATORS[kind](*args, **overrides)


def from_generator_string(spec: str) -> DiscreteMMS:
    """Parse `path:n`, `cycle:n`, `grid:AxB`, `star:k`, `horn:n:e`, `random:n[:seed]`."""
    kind, _, rest = spec.strip().partition(":")
    parts = rest.split(":") if rest else []
    try:
        if kind == "grid":
            if len(parts) != 1 or "x" not in parts[0]:
                raise ValueError("expected grid:AxB")
            a, b = parts[0].split("x")
            return grid(int(a), int(b))
        if kind == "horn":
            if len(parts) != 2:
                raise ValueError("expected horn:n:e")
            return horn(int(parts[0]), float(parts[1]))
        if kind == "random":
            if len(parts) not in (1, 2):
                raise ValueError("expected random:n[:seed]")
            seed = int(parts[1]) if len(parts) == 2 else 42
            return random_graph(int(parts[0]), seed=seed)
        if kind in ("path", "cycle", "star"):
            if len(parts) != 1:
                raise ValueError(f"expected {kind}:n")
            return GENERATORS[kind](int(parts[0]))
    except ValueError as e:
        raise SpaceError(f"Malformed generator string '{spec}': {e}", {"generator": spec}) from e
    raise SpaceError(f"Unknown generator '{kind}' in '{spec}'", {"generator": spec})
