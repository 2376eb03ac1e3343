from .problems import EigenMode, ProblemKind, ProblemSpec, VariationalResult, make_problem, parse_problem, serialize_problem
from .newton import EnergyProblem, minimize_energy
from .checks import MaxPrincipleCheck, maximum_principle_check
from .solvers import (
    p_objective, phi_p, rayleigh_quotient, solve, solve_capacity, solve_eigen, solve_poisson_dirichlet,
    solve_poisson_neumann,
)

__all__ = [
    "EigenMode", "ProblemKind", "ProblemSpec", "VariationalResult", "make_problem", "parse_problem", "serialize_problem",
    "EnergyProblem", "minimize_energy", "MaxPrincipleCheck", "maximum_principle_check",
    "p_objective", "phi_p", "rayleigh_quotient", "solve", "solve_capacity", "solve_eigen",
    "solve_poisson_dirichlet", "solve_poisson_neumann",
]
