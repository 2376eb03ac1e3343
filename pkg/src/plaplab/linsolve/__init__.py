from .cg import boundary_arrays, interior_of, solve_dirichlet_linear, solve_zero_mean_poisson
from .spectrum import Spectrum, dense_dirichlet_spectrum, dense_spectrum

__all__ = [
    "boundary_arrays", "interior_of", "solve_dirichlet_linear", "solve_zero_mean_poisson",
    "Spectrum", "dense_dirichlet_spectrum", "dense_spectrum",
]
