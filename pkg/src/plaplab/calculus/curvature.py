import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg as linalg
from pydantic import BaseModel, ConfigDict

from src.plaplab.space.mms import DiscreteMMS

logger = logging.getLogger(__name__)


class CurvatureReport(BaseModel):
    vertices: List[int]
    pointwise_K: np.ndarray
    global_K: float
    minimizers: Dict[int, np.ndarray]
    isolated: List[int]

    model_config = ConfigDict(arbitrary_types_allowed=True)


def _local_forms(space: DiscreteMMS, x: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Gamma_2 and Gamma quadratic forms at x on the 2-ball, with u_x pinned to 0.
    Returns (A, Cx, sphere1, sphere2); rows/cols of A ordered as sphere1 + sphere2.
    """
    W = space.weight_matrix
    m = space.measure

    def nbrs(y: int) -> Tuple[np.ndarray, np.ndarray]:
        lo, hi = W.indptr[y], W.indptr[y + 1]
        return W.indices[lo:hi], W.data[lo:hi]

    s1, _ = nbrs(x)
    s1 = np.sort(s1)
    inner = set(s1.tolist()) | {x}
    s2 = sorted({int(z) for y in s1 for z in nbrs(y)[0] if int(z) not in inner})
    local = [x] + s1.tolist() + s2
    index = {v: k for k, v in enumerate(local)}
    size = len(local)

    def gamma_form(y: int) -> np.ndarray:
        C = np.zeros((size, size))
        ys, ws = nbrs(y)
        ky = index[y]
        for z, w in zip(ys, ws):
            kz = index[int(z)]
            c = w / (2.0 * m[y])
            C[kz, kz] += c
            C[ky, ky] += c
            C[ky, kz] -= c
            C[kz, ky] -= c
        return C

    def laplacian_row(y: int) -> np.ndarray:
        row = np.zeros(size)
        ys, ws = nbrs(y)
        for z, w in zip(ys, ws):
            row[index[int(z)]] += w / m[y]
            row[index[y]] -= w / m[y]
        return row

    Cx = gamma_form(x)
    Lx = laplacian_row(x)
    A = np.zeros((size, size))
    D = np.zeros((size, size))
    xs, wx = nbrs(x)
    for y, w in zip(xs, wx):
        y = int(y)
        A += 0.5 * (w / m[x]) * (gamma_form(y) - Cx)
        e = np.zeros(size)
        e[index[y]] += 1.0
        e[0] -= 1.0
        D += (w / (2.0 * m[x])) * np.outer(e, laplacian_row(y) - Lx)
    A -= 0.5 * (D + D.T)
    return A[1:, 1:], Cx[1:, 1:], s1, np.array(s2, dtype=np.int64)


def _normalise_sign(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def vertex_curvature(space: DiscreteMMS, x: int) -> Tuple[float, Optional[np.ndarray]]:
    """
    K(x) = min Gamma_2(u)(x) / Gamma(u,u)(x), with a minimizer normalised to Gamma(u*)(x) = 1.
    Isolated vertices return (+inf, None).
    """
    x = space.check_vertex(x)
    A, C, s1, s2 = _local_forms(space, x)
    r = s1.shape[0]
    if r == 0:
        return float("inf"), None
    A_RR, A_RN, A_NN = A[:r, :r], A[:r, r:], A[r:, r:]
    C_R = C[:r, :r]
    if s2.shape[0]:
        X = np.linalg.solve(A_NN, A_RN.T)
        Q = A_RR - A_RN @ X
    else:
        X = np.zeros((0, r))
        Q = A_RR
    Q = 0.5 * (Q + Q.T)
    values, vectors = linalg.eigh(Q, C_R)
    v = _normalise_sign(vectors[:, 0])
    u = np.zeros(space.n)
    u[s1] = v
    if s2.shape[0]:
        u[s2] = -X @ v
    return float(values[0]), u


def curvature_lower_bound(space: DiscreteMMS, vertex: Optional[int] = None) -> CurvatureReport:
    """Pointwise Bakry-Emery bound on one vertex or on all of them."""
    vertices = [space.check_vertex(vertex)] if vertex is not None else list(range(space.n))
    K = np.empty(len(vertices))
    minimizers: Dict[int, np.ndarray] = {}
    isolated: List[int] = []
    for k, x in enumerate(vertices):
        K[k], u = vertex_curvature(space, x)
        if u is None:
            isolated.append(x)
            logger.warning(f"Vertex {x} is isolated; K set to +inf")
        else:
            minimizers[x] = u
    global_K = float(K.min()) if K.size else float("inf")
    logger.info(f"Curvature over {len(vertices)} vertices: global K = {global_K:.6g}")
    return CurvatureReport(vertices=vertices, pointwise_K=K, global_K=global_K,
                           minimizers=minimizers, isolated=isolated)
