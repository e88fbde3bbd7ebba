"""Radial Rayleigh quotients with boundary terms and the critical thresholds.

The quotients have the form::

    ( int |grad u|^2 - int V u^2 + sign * alpha * int_{|x|=R} R^(-2) (x.nu) u^2 dS ) / int W u^2

over a ball (``sign = +1``) or the exterior of a ball (``sign = -1``, the
outward normal of the exterior points to the origin).  Only the radial sector
is solved by default: for radial ``V`` and ``W`` the harmonic term
``c_m / |x|^2`` with ``c_m > 0`` can only raise the quotient.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .grids import PositivityError, RadialDomain, RadialGrid, assemble, eigenpairs, make_grid
from .potentials import InverseSquare

DEEP_FRACTION = 1e-300
DEEP_NODES = 13801
EXTERIOR_RINF = 1e300


class DiscretizationFault(RuntimeError):
    """A computed value contradicts a proven bound."""


class CriticalWarning(RuntimeWarning):
    """Quotient evaluated at a parameter where no minimizer exists."""


@dataclass(frozen=True)
class RayleighProblem:
    """Radial quotient on a ball or exterior domain.

    ``denominator`` defaults to ``|x|^-2``; ``potential`` (subtracted in the
    numerator) defaults to none.
    """

    N: int
    domain: RadialDomain
    boundary_coefficient: float = 0.0
    potential: object = None
    denominator: object = None
    sector: int = 0

    @property
    def sign(self) -> float:
        return self.domain.boundary_sign

    @property
    def weight(self):
        return self.denominator if self.denominator is not None else InverseSquare(self.N, 1.0)


@dataclass(frozen=True, eq=False)
class EigenResult:
    """Smallest eigenpair of a discretized quotient.

    ``vector`` is the computational grid function (gauge variable) on all
    nodes and ``log_gauge`` its gauge, so that ``u = exp(log_gauge) * vector``.
    ``convergence_trace`` lists values on successively refined grids and
    ``extrapolated`` the Richardson value built from the last two (``None``
    for a single grid).
    """

    value: float
    vector: np.ndarray = field(repr=False)
    residual: float
    convergence_trace: tuple
    grid: RadialGrid = field(repr=False)
    log_gauge: np.ndarray = field(repr=False)
    extrapolated: float | None = None
    notes: tuple = ()

    @property
    def best(self) -> float:
        return self.extrapolated if self.extrapolated is not None else self.value

    def profile(self):
        return np.exp(self.log_gauge) * self.vector


def _solve_once(p: RayleighProblem, grid: RadialGrid):
    op = assemble(p.N, grid, potential=p.potential, boundary_coefficient=p.boundary_coefficient,
                  denominator=p.weight, sector=p.sector)
    pairs = eigenpairs(op, 1)
    x = op.expand(pairs.vectors[:, 0])
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    return float(pairs.values[0]), x, float(pairs.residuals[0]), op.log_gauge


def solve_quotient(p: RayleighProblem, grid: RadialGrid, refinements: int = 0) -> EigenResult:
    """Smallest generalized eigenvalue of the assembled pencil.

    With ``refinements > 0`` the grid is halved that many times; the trace
    holds every level and ``extrapolated`` is the Richardson value for a
    second-order error.
    """
    if p.weight is None:
        raise ValueError("denominator weight is required")
    trace = []
    g = grid
    for level in range(refinements + 1):
        value, x, res, logg = _solve_once(p, g)
        trace.append(value)
        if level < refinements:
            g = g.refine()
    extra = None
    if len(trace) > 1:
        extra = trace[-1] + (trace[-1] - trace[-2]) / 3.0
    notes = ()
    if p.weight is not None and isinstance(p.weight, InverseSquare) and p.potential is None:
        half = (p.N - 2) / 2
        if abs(p.boundary_coefficient - half) < 1e-12 and p.domain.kind in ("ball", "exterior"):
            msg = (f"alpha = (N-2)/2 = {half}: the infimum is not attained and the "
                   "discrete value converges slowly")
            warnings.warn(msg, CriticalWarning, stacklevel=2)
            notes = (msg,)
    return EigenResult(trace[-1], x, res, tuple(trace), g, logg, extra, notes)


def lambda_formula(alpha: float, N: int) -> float:
    """Ball value: ``alpha (N-2-alpha)`` up to ``(N-2)/2``, then ``((N-2)/2)^2``."""
    half = (N - 2) / 2
    return alpha * (N - 2 - alpha) if alpha <= half else half * half


def mu_formula(alpha: float, N: int) -> float:
    """Exterior value, the ball value at the inverted coefficient ``N-2-alpha``."""
    return lambda_formula(N - 2 - alpha, N)


def lambda_ball(N: int, alpha: float, R: float = 1.0, n: int = DEEP_NODES,
                refinements: int = 1) -> EigenResult:
    """``lambda_Ball(alpha)`` with denominator ``|x|^-2``."""
    grid = make_grid(RadialDomain.ball(R), n, DEEP_FRACTION)
    return solve_quotient(RayleighProblem(N, grid.domain, alpha), grid, refinements)


def mu_exterior(N: int, alpha: float, R: float = 1.0, Rinf: float = EXTERIOR_RINF,
                n: int = DEEP_NODES, refinements: int = 1) -> EigenResult:
    """``mu_Exterior(alpha)`` with denominator ``|x|^-2``, truncated at ``Rinf``."""
    grid = make_grid(RadialDomain.exterior(R, Rinf), n)
    return solve_quotient(RayleighProblem(N, grid.domain, alpha), grid, refinements)


EPSILON_VARIANTS = ("base", "log", "kelvin-dual")


def epsilon0_problem(N: int, weight, variant: str = "base", k: int = 0,
                     Rinf: float = 1e8) -> RayleighProblem:
    """Quotient whose infimum is the threshold of the chosen variant.

    ``base`` and ``log`` live on the exterior of the unit ball with boundary
    coefficient ``(N-2+k)/2`` and tail ``weight``; ``kelvin-dual`` lives on
    the unit ball with coefficient ``(N-2-k)/2`` and core ``weight``.
    """
    if variant not in EPSILON_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "log" and k < 1:
        raise ValueError("the log-refined variant needs k >= 1")
    if variant == "base" and k != 0:
        raise ValueError("the base variant has k = 0")
    if variant == "kelvin-dual":
        if not 0 <= k < N - 2:
            raise ValueError("the dual variant needs 0 <= k < N-2")
        return RayleighProblem(N, RadialDomain.ball(1.0), (N - 2 - k) / 2, denominator=weight)
    return RayleighProblem(N, RadialDomain.exterior(1.0, Rinf), (N - 2 + k) / 2,
                           denominator=weight)


def epsilon0_lower_bound(N: int, K: float, variant: str = "base", k: int = 0) -> float:
    """Proven lower bound of the threshold, ``lambda((N-2-k)/2) / K`` style.

    Both the exterior and the dual variants reduce to
    ``(N-2+k)(N-2-k) / (4K)``, which is ``((N-2)/2)^2 / K`` for ``k = 0``.
    """
    if K <= 0:
        return 0.0
    return (N - 2 + k) * (N - 2 - k) / (4.0 * K)


def epsilon0(N: int, weight, variant: str = "base", k: int = 0, n: int = 4001,
             refinements: int = 1, Rinf: float = 1e8, r_min_fraction: float = 1e-12,
             check_bound: bool = True) -> EigenResult:
    """Threshold ``eps_0`` (or ``eps_{k,0}``, or the dual ``eps_bar``).

    ``weight`` is a tail ``f`` (exterior variants) or a core ``g`` (dual),
    carrying the declared bound constant ``K``.

    Raises
    ------
    DiscretizationFault
        If the result falls below the proven lower bound.
    """
    p = epsilon0_problem(N, weight, variant, k, Rinf)
    if variant == "kelvin-dual":
        grid = make_grid(p.domain, n, r_min_fraction)
    else:
        grid = make_grid(p.domain, n)
    try:
        res = solve_quotient(p, grid, refinements)
    except PositivityError as exc:
        raise DiscretizationFault(str(exc)) from exc
    if check_bound:
        bound = epsilon0_lower_bound(N, getattr(weight, "K", 0.0), variant, k)
        if res.best < bound * (1 - 1e-9):
            raise DiscretizationFault(
                f"threshold {res.best:.10g} violates the lower bound {bound:.10g}")
    return res


@dataclass(frozen=True)
class ExistenceCheck:
    lambda_domain: float
    lambda_inner: float
    gap: float
    tolerance: float
    holds: bool
    inconclusive: bool


def _quotient_or_inf(p: RayleighProblem, grid: RadialGrid, refinements: int):
    r = grid.r
    if not np.any(p.weight.scaled(r) > 0):
        return np.inf, 0.0
    res = solve_quotient(p, grid, refinements)
    err = abs(res.best - res.value) if res.extrapolated is not None else 0.0
    return res.best, err


def minimizer_existence_condition(N: int, alpha: float, weight, r: float, R: float = 1.0,
                                  n: int = DEEP_NODES, r_min_fraction: float = DEEP_FRACTION,
                                  refinements: int = 1, rtol: float = 1e-6) -> ExistenceCheck:
    """Compare ``lambda_Omega(alpha, V)`` on ``B_R`` with the value on ``B_r``.

    A weight vanishing on ``B_r`` gives ``lambda_{B_r} = +inf``.  ``holds`` is
    the strict inequality ``0 < lambda_Omega < lambda_{B_r}`` with a gap above
    the combined tolerance; a smaller gap is reported as inconclusive.
    """
    if not 0 < r < R:
        raise ValueError("inner ball must lie inside the domain")
    outer_grid = make_grid(RadialDomain.ball(R), n, r_min_fraction)
    inner_grid = make_grid(RadialDomain.ball(r), n, r_min_fraction)
    lam_o, err_o = _quotient_or_inf(RayleighProblem(N, outer_grid.domain, alpha, denominator=weight),
                                    outer_grid, refinements)
    lam_i, err_i = _quotient_or_inf(RayleighProblem(N, inner_grid.domain, alpha, denominator=weight),
                                    inner_grid, refinements)
    tol = err_o + err_i + rtol * max(1.0, abs(lam_o))
    gap = lam_i - lam_o
    inconclusive = np.isfinite(gap) and abs(gap) <= tol
    holds = bool(lam_o > 0 and gap > tol)
    return ExistenceCheck(lam_o, lam_i, float(gap), float(tol), holds, bool(inconclusive))
