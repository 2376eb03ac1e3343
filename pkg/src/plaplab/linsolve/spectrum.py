import logging
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg as linalg

from src.plaplab.calculus.gamma import stiffness_matrix
from src.plaplab.config import DENSE_CAP
from src.plaplab.exceptions import LinearSolveError
from src.plaplab.space.mms import DiscreteMMS

logger = logging.getLogger(__name__)


class Spectrum(NamedTuple):
    eigenvalues: np.ndarray
    eigenfields: np.ndarray  # columns, m-orthonormal
    support: np.ndarray


def _check_cap(size: int, cap: int) -> None:
    if size > cap:
        raise LinearSolveError(f"Dense spectrum requested for {size} vertices; cap is {cap}",
                               {"n": size, "cap": cap})


def _symmetrized(K: np.ndarray, m: np.ndarray) -> Spectrum:
    s = 1.0 / np.sqrt(m)
    values, V = linalg.eigh(s[:, None] * K * s[None, :])
    fields = s[:, None] * V
    for k in range(fields.shape[1]):
        j = int(np.argmax(np.abs(fields[:, k])))
        if fields[j, k] < 0:
            fields[:, k] = -fields[:, k]
    return values, fields


def dense_spectrum(space: DiscreteMMS, cap: int = DENSE_CAP) -> Spectrum:
    """Eigenpairs of -Delta in ascending order: Delta phi_k = -lambda_k phi_k."""
    _check_cap(space.n, cap)
    K = -stiffness_matrix(space).toarray()
    values, fields = _symmetrized(K, space.measure)
    return Spectrum(values, fields, np.arange(space.n))


def dense_dirichlet_spectrum(space: DiscreteMMS, boundary: Sequence[int], cap: int = DENSE_CAP) -> Spectrum:
    """Eigenpairs of -Delta on the interior with zero boundary values; fields are extended by 0."""
    B = space.check_vertices(boundary)
    mask = np.ones(space.n, dtype=bool)
    mask[B] = False
    I = np.flatnonzero(mask)
    if I.size == 0:
        raise LinearSolveError("Dirichlet spectrum needs at least one interior vertex", {"boundary": B.tolist()})
    _check_cap(I.size, cap)
    K = -stiffness_matrix(space).toarray()[np.ix_(I, I)]
    values, local = _symmetrized(K, space.measure[I])
    fields = np.zeros((space.n, I.size))
    fields[I] = local
    return Spectrum(values, fields, I)
