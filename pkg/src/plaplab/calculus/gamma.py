"""
Discrete Gamma-calculus on a DiscreteMMS.

All pointwise operators are evaluated edge by edge and scattered back to
vertices with np.bincount, so every function here is a pure map of numpy
vectors. Sparse counterparts (`*_matrix`, `*_operator`) assemble the same
linear maps for the solvers.
"""
import logging
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sparse

from src.plaplab.config import MACHINE_SMOOTHING
from src.plaplab.exceptions import ProblemSpecError
from src.plaplab.space.mms import DiscreteMMS

logger = logging.getLogger(__name__)

INF_VARIANTS = ("gamma_form", "paper_form")


def check_exponent(p: float) -> float:
    p = float(p)
    if not p > 1.0 or not np.isfinite(p):
        raise ProblemSpecError(f"p must lie in (1, inf), got {p}", {"p": p, "constraint": "(1, inf)"})
    return p


def check_epsilon(eps: float, strict: bool = False) -> float:
    eps = float(eps)
    if strict and not eps > 0:
        raise ProblemSpecError(f"epsilon must be positive, got {eps}", {"epsilon": eps})
    if not eps >= 0:
        raise ProblemSpecError(f"epsilon must be non-negative, got {eps}", {"epsilon": eps})
    return eps


def _scatter(space: DiscreteMMS, at_tail: np.ndarray, at_head: np.ndarray) -> np.ndarray:
    n = space.n
    return (np.bincount(space.tails, weights=at_tail, minlength=n)
            + np.bincount(space.heads, weights=at_head, minlength=n))


def _diff(space: DiscreteMMS, f: np.ndarray) -> np.ndarray:
    return f[space.heads] - f[space.tails]

# -----------------------------------------------------------------------------
# Pointwise operators
# -----------------------------------------------------------------------------

def gamma(space: DiscreteMMS, f, g) -> np.ndarray:
    """Gamma(f, g)(x) = 1/(2 m_x) sum_y w_xy (f_y - f_x)(g_y - g_x)."""
    f = space.field(f, "f")
    g = space.field(g, "g")
    c = space.conductance * _diff(space, f) * _diff(space, g)
    return _scatter(space, c, c) / (2.0 * space.measure)


def carre_du_champ(space: DiscreteMMS, u) -> np.ndarray:
    """Gamma(u, u)."""
    return gamma(space, u, u)


def laplacian(space: DiscreteMMS, f) -> np.ndarray:
    f = space.field(f, "f")
    c = space.conductance * _diff(space, f)
    return _scatter(space, c, -c) / space.measure


def p_coefficient(space: DiscreteMMS, u, p: float, eps: float) -> np.ndarray:
    """
    a = (Gamma(u,u) + eps)^((p-2)/2).
    At eps = 0 the coefficient is 0 wherever Gamma(u,u) vanishes.
    """
    p = check_exponent(p)
    eps = check_epsilon(eps)
    G = carre_du_champ(space, u)
    return _coefficient(G, p, eps)


def _coefficient(G: np.ndarray, p: float, eps: float) -> np.ndarray:
    if p == 2.0:
        return np.ones_like(G)
    base = G + eps
    if eps > 0:
        return base ** ((p - 2.0) / 2.0)
    a = np.zeros_like(G)
    pos = base > 0
    a[pos] = base[pos] ** ((p - 2.0) / 2.0)
    return a


def p_laplacian(space: DiscreteMMS, u, p: float, eps: float = 0.0) -> np.ndarray:
    """
    Weak-form p-Laplacian: L(x) = 1/m_x sum_y (w_xy/2)(a_x + a_y)(u_y - u_x).
    Equals -(1/m) times the gradient of p_energy.
    """
    u = space.field(u, "u")
    a = p_coefficient(space, u, p, eps)
    c = 0.5 * space.conductance * (a[space.tails] + a[space.heads]) * _diff(space, u)
    return _scatter(space, c, -c) / space.measure


def p_energy(space: DiscreteMMS, u, p: float, eps: float = 0.0) -> float:
    """(1/p) sum (Gamma(u,u) + eps)^(p/2) m."""
    p = check_exponent(p)
    eps = check_epsilon(eps)
    G = carre_du_champ(space, u)
    return float(np.dot((G + eps) ** (p / 2.0), space.measure) / p)


def p_energy_gradient(space: DiscreteMMS, u, p: float, eps: float = 0.0) -> np.ndarray:
    return -space.measure * p_laplacian(space, u, p, eps)


def inf_laplacian(space: DiscreteMMS, u, variant: str = "gamma_form") -> np.ndarray:
    u = space.field(u, "u")
    G = carre_du_champ(space, u)
    if variant == "gamma_form":
        return 0.5 * gamma(space, u, G)
    if variant == "paper_form":
        s = np.sqrt(G)
        return s * gamma(space, s, u)
    raise ProblemSpecError(f"Unknown infinity-Laplacian variant '{variant}'", {"known": INF_VARIANTS})


def hessian_proxy(space: DiscreteMMS, U, w) -> np.ndarray:
    """H_U[w] = Gamma(w, Gamma(U, w)) - 1/2 Gamma(U, Gamma(w, w)); linear in U."""
    U = space.field(U, "U")
    w = space.field(w, "w")
    return gamma(space, w, gamma(space, U, w)) - 0.5 * gamma(space, U, carre_du_champ(space, w))


class Developed(NamedTuple):
    values: np.ndarray
    residual: np.ndarray


def developed_operator(space: DiscreteMMS, u, p: float, eps: float) -> Developed:
    """
    D = Delta u + (p-2) Delta_inf u / (Gamma(u,u) + eps), together with the
    develop-identity residual rho = Delta_{p,eps} u - (Gamma+eps)^((p-2)/2) D.
    """
    p = check_exponent(p)
    eps = check_epsilon(eps, strict=True)
    u = space.field(u, "u")
    G = carre_du_champ(space, u)
    D = laplacian(space, u) + (p - 2.0) * inf_laplacian(space, u) / (G + eps)
    rho = p_laplacian(space, u, p, eps) - (G + eps) ** ((p - 2.0) / 2.0) * D
    return Developed(D, rho)


def gamma2(space: DiscreteMMS, u) -> np.ndarray:
    """Gamma_2(u) = 1/2 Delta Gamma(u,u) - Gamma(u, Delta u)."""
    u = space.field(u, "u")
    return 0.5 * laplacian(space, carre_du_champ(space, u)) - gamma(space, u, laplacian(space, u))

# -----------------------------------------------------------------------------
# Sparse operators
# -----------------------------------------------------------------------------

def stiffness_matrix(space: DiscreteMMS, edge_coefficient: Optional[np.ndarray] = None) -> sparse.csr_matrix:
    """
    S with (S u)(x) = sum_y c_xy (u_y - u_x), c = w * edge_coefficient.
    Symmetric, negative semidefinite.
    """
    c = space.conductance if edge_coefficient is None else space.conductance * edge_coefficient
    t, h, n = space.tails, space.heads, space.n
    I = np.concatenate([t, h, t, h])
    J = np.concatenate([h, t, t, h])
    V = np.concatenate([c, c, -c, -c])
    return sparse.coo_matrix((V, (I, J)), shape=(n, n)).tocsr()


def laplacian_matrix(space: DiscreteMMS, edge_coefficient: Optional[np.ndarray] = None) -> sparse.csr_matrix:
    return (sparse.diags(1.0 / space.measure) @ stiffness_matrix(space, edge_coefficient)).tocsr()


def gamma_operator(space: DiscreteMMS, f) -> sparse.csr_matrix:
    """G_f with G_f g = Gamma(f, g)."""
    f = space.field(f, "f")
    t, h, n = space.tails, space.heads, space.n
    c = space.conductance * _diff(space, f)
    ct = c / (2.0 * space.measure[t])
    ch = c / (2.0 * space.measure[h])
    I = np.concatenate([t, t, h, h])
    J = np.concatenate([h, t, h, t])
    V = np.concatenate([ct, -ct, ch, -ch])
    return sparse.coo_matrix((V, (I, J)), shape=(n, n)).tocsr()


def hessian_proxy_operator(space: DiscreteMMS, w) -> sparse.csr_matrix:
    """Matrix of U -> H_U[w]."""
    Gw = gamma_operator(space, w)
    return (Gw @ Gw - 0.5 * gamma_operator(space, carre_du_champ(space, w))).tocsr()


def p_energy_hessian(space: DiscreteMMS, u, p: float, eps: float = 0.0) -> sparse.csr_matrix:
    """
    Hessian of p_energy at u:
    K_a + (p-2) G_u^T diag(m (Gamma+eps)^((p-4)/2)) G_u,
    where K_a is the stiffness form with edge weight w (a_x + a_y)/2.
    At eps = 0 a machine-level smoothing keeps the second term finite.
    """
    p = check_exponent(p)
    eps = check_epsilon(eps)
    u = space.field(u, "u")
    eps_h = eps if eps > 0 else MACHINE_SMOOTHING
    G = carre_du_champ(space, u)
    a = _coefficient(G, p, eps_h)
    K = -stiffness_matrix(space, 0.5 * (a[space.tails] + a[space.heads]))
    if p == 2.0:
        return K.tocsr()
    Gu = gamma_operator(space, u)
    D = sparse.diags(space.measure * (G + eps_h) ** ((p - 4.0) / 2.0))
    return (K + (p - 2.0) * (Gu.T @ D @ Gu)).tocsr()

# -----------------------------------------------------------------------------
# Bochner
# -----------------------------------------------------------------------------

class BochnerCheck(NamedTuple):
    passed: bool
    margin: float
    worst_vertex: int


def weak_bochner_check(space: DiscreteMMS, u, K: float, tolerance: float = 1e-10) -> BochnerCheck:
    """Pointwise Gamma_2(u) >= K Gamma(u,u); margin is the worst slack."""
    slack = gamma2(space, u) - float(K) * carre_du_champ(space, u)
    worst = int(np.argmin(slack))
    margin = float(slack[worst])
    return BochnerCheck(margin >= -tolerance, margin, worst)
