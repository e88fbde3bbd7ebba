"""Numerical checks of Hardy-type inequalities and heat-kernel bounds for
Schroedinger operators with inverse-square potentials."""

from .funcs import (eval_xk, eval_xk_derivative, eval_xk_tilde, eval_yk, eval_yk_tilde,
                    harmonic_dimension, sector_constant, unit_sphere_area)
from .grids import RadialDomain, RadialGrid, assemble, eigenpairs, make_grid
from .heat import check_bound, diagonal_kernel, heat_grid
from .mazya import MazyaCheck, SobolevQuotient, best_constant, harmonic_improvement_check, mazya_sup
from .potentials import (CriticalInner, CriticalOuter, InverseSquare, IteratedLogBounded,
                         IteratedLogInner, PowerLaw)
from .rayleigh import epsilon0, lambda_ball, lambda_formula, mu_exterior, mu_formula
from .shooting import epsilon0_by_bisection, shoot

__version__ = "0.1.0"
