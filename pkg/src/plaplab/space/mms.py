import logging
import threading
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.csgraph as csgraph
from pydantic import BaseModel, ConfigDict

from src.plaplab.config import BALL_SLACK
from src.plaplab.exceptions import FieldError, SpaceError

logger = logging.getLogger(__name__)

EdgeInput = Union[Tuple[int, int, float], Tuple[int, int, float, float]]


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


# -----------------------------------------------------------------------------
# Space
# -----------------------------------------------------------------------------

class DiscreteMMS:
    """
    Weighted graph with vertex measure and shortest-path metric.

    Edges are stored once with tail < head, sorted lexicographically.
    Conductances drive the calculus, lengths drive the metric.
    Instances are immutable; derived matrices are computed once on first use.
    """

    def __init__(self, measure: np.ndarray, tails: np.ndarray, heads: np.ndarray,
                 conductance: np.ndarray, length: np.ndarray):
        self.measure = _readonly(np.asarray(measure, dtype=float).copy())
        self.tails = _readonly(np.asarray(tails, dtype=np.int64).copy())
        self.heads = _readonly(np.asarray(heads, dtype=np.int64).copy())
        self.conductance = _readonly(np.asarray(conductance, dtype=float).copy())
        self.length = _readonly(np.asarray(length, dtype=float).copy())
        self._distance_rows: Dict[int, np.ndarray] = {}
        self._distance_lock = threading.Lock()

    @property
    def n(self) -> int:
        return int(self.measure.shape[0])

    @property
    def edge_count(self) -> int:
        return int(self.tails.shape[0])

    def __repr__(self) -> str:
        return f"DiscreteMMS(n={self.n}, edges={self.edge_count})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiscreteMMS):
            return NotImplemented
        return (
            np.array_equal(self.measure, other.measure)
            and np.array_equal(self.tails, other.tails)
            and np.array_equal(self.heads, other.heads)
            and np.array_equal(self.conductance, other.conductance)
            and np.array_equal(self.length, other.length)
        )

    __hash__ = None

    # -------------------------------------------------------------------------
    # Sparse structure
    # -------------------------------------------------------------------------

    def _symmetric(self, values: np.ndarray) -> sparse.csr_matrix:
        I = np.concatenate([self.tails, self.heads])
        J = np.concatenate([self.heads, self.tails])
        V = np.concatenate([values, values])
        return sparse.coo_matrix((V, (I, J)), shape=(self.n, self.n)).tocsr()

    @cached_property
    def weight_matrix(self) -> sparse.csr_matrix:
        return self._symmetric(self.conductance)

    @cached_property
    def length_matrix(self) -> sparse.csr_matrix:
        return self._symmetric(self.length)

    @cached_property
    def degree(self) -> np.ndarray:
        """Weighted degree sum_y w_xy."""
        return _readonly(np.asarray(self.weight_matrix.sum(axis=1)).ravel())

    def neighbors(self, x: int) -> np.ndarray:
        self.check_vertex(x)
        W = self.weight_matrix
        return W.indices[W.indptr[x]:W.indptr[x + 1]].copy()

    @cached_property
    def _components(self) -> Tuple[int, np.ndarray]:
        count, labels = csgraph.connected_components(self.weight_matrix, directed=False)
        return int(count), _readonly(labels)

    @property
    def component_count(self) -> int:
        return self._components[0]

    def components(self) -> np.ndarray:
        """Component label per vertex."""
        return self._components[1]

    @property
    def is_connected(self) -> bool:
        return self.component_count == 1

    # -------------------------------------------------------------------------
    # Metric
    # -------------------------------------------------------------------------

    def distances_from(self, x: int) -> np.ndarray:
        self.check_vertex(x)
        with self._distance_lock:
            row = self._distance_rows.get(x)
            if row is None:
                row = csgraph.dijkstra(self.length_matrix, directed=False, indices=x)
                row = _readonly(np.asarray(row, dtype=float))
                self._distance_rows[x] = row
        return row

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        return _readonly(csgraph.shortest_path(self.length_matrix, directed=False))

    def eccentricity(self, x: int) -> float:
        row = self.distances_from(x)
        finite = row[np.isfinite(row)]
        return float(finite.max())

    @cached_property
    def diameter(self) -> float:
        D = self.distance_matrix
        return float(D[np.isfinite(D)].max())

    def ball_members(self, x: int, r: float) -> np.ndarray:
        return np.flatnonzero(self.distances_from(x) <= r + BALL_SLACK)

    def ball_measure(self, x: int, r: float) -> float:
        return float(self.measure[self.ball_members(x, r)].sum())

    # -------------------------------------------------------------------------
    # Validation helpers
    # -------------------------------------------------------------------------

    def check_vertex(self, x: int) -> int:
        if isinstance(x, (bool, np.bool_)) or not isinstance(x, (int, np.integer)):
            raise SpaceError(f"Vertex index must be an integer, got {x!r}", {"vertex": x})
        if not 0 <= int(x) < self.n:
            raise SpaceError(f"Vertex {x} out of range for space with {self.n} vertices",
                             {"vertex": int(x), "n": self.n})
        return int(x)

    def check_vertices(self, xs: Iterable[int]) -> np.ndarray:
        return np.array(sorted({self.check_vertex(x) for x in xs}), dtype=np.int64)

    def field(self, u, name: str = "field") -> np.ndarray:
        """Coerce u to a float vector on this space."""
        arr = np.asarray(u, dtype=float)
        if arr.ndim != 1 or arr.shape[0] != self.n:
            raise FieldError(f"{name} has shape {arr.shape}, expected ({self.n},)",
                             {"name": name, "shape": arr.shape, "n": self.n})
        return arr

    def integrate(self, u: np.ndarray) -> float:
        return float(np.dot(u, self.measure))

    def mean(self, u: np.ndarray) -> float:
        return self.integrate(u) / float(self.measure.sum())

    def l2_norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(np.dot(u * u, self.measure)))

    def lp_norm(self, u: np.ndarray, p: float) -> float:
        return float(np.dot(np.abs(u) ** p, self.measure) ** (1.0 / p))

    # -------------------------------------------------------------------------
    # Derived spaces
    # -------------------------------------------------------------------------

    def scaled(self, conductance: float = 1.0, length: float = 1.0, measure: float = 1.0) -> "DiscreteMMS":
        return DiscreteMMS(self.measure * measure, self.tails, self.heads,
                           self.conductance * conductance, self.length * length)

    def with_measure(self, measure: np.ndarray) -> "DiscreteMMS":
        return build_space(self.edge_list(), measure)

    def edge_list(self) -> List[Tuple[int, int, float, float]]:
        return [(int(i), int(j), float(w), float(l))
                for i, j, w, l in zip(self.tails, self.heads, self.conductance, self.length)]


# -----------------------------------------------------------------------------
# Construction
# -----------------------------------------------------------------------------

def build_space(edges: Iterable[EdgeInput], measure: Union[Sequence[float], Dict[int, float], np.ndarray],
                n: Optional[int] = None) -> DiscreteMMS:
    """
    Validate and assemble a DiscreteMMS.

    `edges` holds (i, j, conductance) or (i, j, conductance, length); the length defaults to 1.
    `measure` is a sequence indexed by vertex, or a dict that must cover 0..n-1.
    Repeating an edge is allowed only with identical data.
    """
    if isinstance(measure, dict):
        size = n if n is not None else (max(measure) + 1 if measure else 0)
        missing = [x for x in range(size) if x not in measure]
        if missing:
            raise SpaceError(f"Missing measure for vertex {missing[0]}", {"vertex": missing[0]})
        m = np.array([measure[x] for x in range(size)], dtype=float)
    else:
        m = np.asarray(measure, dtype=float).ravel()
    if n is not None and m.shape[0] != n:
        raise SpaceError(f"Measure has {m.shape[0]} entries, expected {n}", {"n": n})
    if m.shape[0] < 1:
        raise SpaceError("A space needs at least one vertex")
    bad = np.flatnonzero(~(np.isfinite(m) & (m > 0)))
    if bad.size:
        x = int(bad[0])
        raise SpaceError(f"Non-positive measure m({x}) = {m[x]}", {"vertex": x, "measure": float(m[x])})
    size = m.shape[0]

    seen: Dict[Tuple[int, int], Tuple[float, float]] = {}
    for entry in edges:
        if len(entry) == 3:
            i, j, w = entry
            length = 1.0
        elif len(entry) == 4:
            i, j, w, length = entry
        else:
            raise SpaceError(f"Edge entry {entry!r} must have 3 or 4 components", {"edge": entry})
        i, j, w, length = int(i), int(j), float(w), float(length)
        if not (0 <= i < size and 0 <= j < size):
            raise SpaceError(f"Edge ({i}, {j}) references a vertex outside 0..{size - 1}", {"edge": entry})
        if i == j:
            raise SpaceError(f"Self-loop at vertex {i}", {"edge": entry})
        if not (np.isfinite(w) and w > 0):
            raise SpaceError(f"Non-positive conductance {w} on edge ({i}, {j})", {"edge": entry})
        if not (np.isfinite(length) and length > 0):
            raise SpaceError(f"Non-positive length {length} on edge ({i}, {j})", {"edge": entry})
        key = (min(i, j), max(i, j))
        if key in seen:
            if seen[key] != (w, length):
                raise SpaceError(f"Edge {key} given twice with different data",
                                 {"edge": key, "first": seen[key], "second": (w, length)})
            continue
        seen[key] = (w, length)

    keys = sorted(seen)
    tails = np.array([k[0] for k in keys], dtype=np.int64)
    heads = np.array([k[1] for k in keys], dtype=np.int64)
    cond = np.array([seen[k][0] for k in keys], dtype=float)
    lens = np.array([seen[k][1] for k in keys], dtype=float)
    space = DiscreteMMS(m, tails, heads, cond, lens)
    logger.debug(f"Built {space}")
    return space


# -----------------------------------------------------------------------------
# Balls
# -----------------------------------------------------------------------------

class Ball(BaseModel):
    center: int
    radius: float
    members: Tuple[int, ...]

    model_config = ConfigDict(frozen=True)

    def __contains__(self, x: int) -> bool:
        return int(x) in self.members


def ball(space: DiscreteMMS, center: int, radius: float) -> Ball:
    """Closed metric ball {y : d(center, y) <= radius}."""
    center = space.check_vertex(center)
    if not radius >= 0:
        raise SpaceError(f"Ball radius must be non-negative, got {radius}", {"radius": radius})
    members = tuple(int(y) for y in space.ball_members(center, radius))
    return Ball(center=center, radius=float(radius), members=members)
