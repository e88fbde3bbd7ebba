"""One-dimensional Maz'ja criterion, best Sobolev-type constants and the
harmonic-sector improvement of Hardy-type forms.

The criterion: ``int (v')^2 A >= c (int |v|^q B)^(2/q)`` holds for all ``v``
vanishing near infinity iff

    sup_r ( int_0^r B ) ( int_r^oo 1/A )^(q/2) < oo.
"""

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.sparse.linalg import splu
from scipy.special import eval_gegenbauer, roots_gegenbauer

from .funcs import sector_constant, unit_sphere_area
from .grids import RadialDomain, RadialGrid, assemble, gauss_points, make_grid


class InequalityViolation(RuntimeError):
    """A form that a theorem declares nonnegative took a negative value."""


@dataclass(frozen=True)
class MazyaCheck:
    """Weights ``A``, ``B`` (callables of ``r``) and exponent ``q``.

    The filled record carries ``sup_value``, ``argmax_r``, ``finite`` and the
    sequence of suprema over the extended domains in ``trace``.
    """

    A: Callable = field(repr=False)
    B: Callable = field(repr=False)
    q: float
    r_min: float = 1e-8
    r_max: float = 1e8
    points_per_unit: int = 100
    sup_value: float | None = None
    argmax_r: float | None = None
    finite: bool | None = None
    trace: tuple = ()

    def __post_init__(self):
        if self.q < 2:
            raise ValueError("q must be at least 2")
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")


def _mazya_product(A, B, q, r_min, r_max, ppu):
    s = np.linspace(np.log(r_min), np.log(r_max), int(ppu * np.log(r_max / r_min)) + 1)
    r = np.exp(s)
    b = B(r) * r
    inv_a = r / A(r)
    if np.any(b < 0) or np.any(~(inv_a > 0)):
        raise ValueError("A must be positive and B nonnegative on the grid")
    IB = cumulative_trapezoid(b, s, initial=0.0)
    IA = cumulative_trapezoid(inv_a[::-1], -s[::-1], initial=0.0)[::-1]
    prod = IB * IA ** (q / 2)
    j = int(np.argmax(prod))
    return float(prod[j]), float(r[j])


def mazya_sup(check: MazyaCheck, extensions: int = 2, factor: float = 1e4,
              rtol: float = 0.05) -> MazyaCheck:
    """Supremum of the Maz'ja product with a domain-extension study.

    The domain ``[r_min, r_max]`` is widened ``extensions`` times by ``factor``
    at both ends; the supremum is declared finite when the last extension
    changes it by less than ``rtol`` relative.
    """
    sups = []
    arg = None
    lo, hi = check.r_min, check.r_max
    for _ in range(extensions + 1):
        val, arg = _mazya_product(check.A, check.B, check.q, lo, hi, check.points_per_unit)
        sups.append(val)
        lo, hi = lo / factor, hi * factor
    finite = bool(np.isfinite(sups[-1]) and abs(sups[-1] - sups[-2]) <= rtol * abs(sups[-1]))
    return replace(check, sup_value=sups[-1], argmax_r=arg, finite=finite, trace=tuple(sups))


@dataclass(frozen=True)
class SobolevQuotient:
    """``(int |grad u|^2 - int V u^2) / (int |u|^p W dx)^(2/p)`` for radial ``u``.

    With ``ground`` set the numerator is the weighted Dirichlet form of
    ``w = u / phi`` (identical for ``V`` the ground state's potential).
    ``target_weight`` is ``W(r)`` (defaults to 1) and ``p`` defaults to
    ``2N/(N-2)``.  ``domain`` fixes where functions live; Dirichlet at the
    outer edge of whole-space domains.
    """

    N: int
    domain: RadialDomain
    target_weight: Callable | None = field(default=None, repr=False)
    p: float | None = None
    potential: object = None
    ground: object = None
    r_min_fraction: float = 1e-6

    @property
    def exponent(self) -> float:
        return 2 * self.N / (self.N - 2) if self.p is None else self.p


@dataclass(frozen=True, eq=False)
class BestConstant:
    c_estimate: float
    profile: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    trace: tuple
    restarts: int


class _GaussTarget:
    """``int |u|^p W r^(N-1) dr`` of the piecewise-linear interpolant of the
    computational variable, by element Gauss rules (per unit angle)."""

    def __init__(self, quot, op, grid, order=8):
        sq, wq, xi = gauss_points(grid, order)
        rq = np.exp(sq)
        if quot.ground is not None:
            logg = quot.ground.log_value(rq.ravel()).reshape(sq.shape)
        else:
            logg = -(quot.N - 2) / 2 * sq
        W = np.ones_like(rq) if quot.target_weight is None else quot.target_weight(rq.ravel()).reshape(sq.shape)
        if np.any(W < 0):
            raise ValueError("target weight must be nonnegative")
        self.p = quot.exponent
        self.weights = wq * W * np.exp(self.p * logg + quot.N * sq)
        self.xi = xi
        self.op = op

    def _at_points(self, x):
        full = self.op.expand(x)
        return full[:-1, None] * (1 - self.xi)[None, :] + full[1:, None] * self.xi[None, :]

    def value(self, x):
        return float(np.sum(self.weights * np.abs(self._at_points(x)) ** self.p))

    def half_gradient(self, x):
        """Gradient of ``value`` divided by ``p``."""
        xq = self._at_points(x)
        g = self.weights * np.abs(xq) ** (self.p - 2) * xq
        full = np.zeros(self.op.grid.n)
        full[:-1] += np.sum(g * (1 - self.xi), axis=1)
        full[1:] += np.sum(g * self.xi, axis=1)
        return full[self.op.free]


def _descend(op, A_lu, target, x, max_iter, ftol):
    p = target.p

    def normalize(x):
        return x / target.value(x) ** (1 / p)

    x = normalize(x)
    E = op.energy(x)
    for _ in range(max_iter):
        if E < 0:
            raise InequalityViolation(f"numerator took the negative value {E:.6g}")
        d = x - E * A_lu.solve(target.half_gradient(x))
        tau = 1.0
        while tau > 1e-8:
            xn = normalize(x - tau * d)
            En = op.energy(xn)
            if En < E:
                break
            tau *= 0.5
        else:
            break
        done = E - En <= ftol * abs(E)
        x, E = xn, En
        if done:
            break
    return E, x


def best_constant(quot: SobolevQuotient, n: int = 401, refinements: int = 1, restarts: int = 20,
                  seed: int = 0, max_iter: int = 400, ftol: float = 1e-10) -> BestConstant:
    """Smallest value of the quotient found by preconditioned descent.

    Each restart begins from a random positive bump, takes steps along the
    ``A^{-1}``-preconditioned gradient with backtracking and renormalizes to
    unit target norm.  The value is an upper bound for the true infimum; the
    trace lists the best value on each refinement level.

    Raises
    ------
    InequalityViolation
        If a negative numerator is encountered.
    """
    rng = np.random.default_rng(seed)
    area = unit_sphere_area(quot.N)
    p = quot.exponent
    grid = make_grid(quot.domain, n, quot.r_min_fraction)
    trace = []
    best_x = None
    for level in range(refinements + 1):
        op = assemble(quot.N, grid, potential=quot.potential, weight=quot.ground, lumped=False)
        target = _GaussTarget(quot, op, grid)
        lu = splu(op.sparse())
        s = grid.s[op.free]
        starts = []
        if best_x is not None:
            starts.append(np.interp(grid.s, prev_s, best_x)[op.free])
        for _ in range(restarts - len(starts)):
            center = rng.uniform(s[0], s[-1])
            width = rng.uniform(0.3, 0.3 * (s[-1] - s[0]))
            starts.append(np.exp(-0.5 * ((s - center) / width) ** 2) + 1e-3)
        best = (np.inf, None)
        for x0 in starts:
            E, x = _descend(op, lu, target, x0, max_iter, ftol)
            if E < best[0]:
                best = (E, x)
        # E is per unit angle; restore the full-space normalization
        c = best[0] * area / area ** (2 / p)
        trace.append(c)
        best_x, prev_s = op.expand(best[1]), grid.s
        if level < refinements:
            grid = grid.refine()
    profile = np.exp(op.log_gauge) * best_x
    return BestConstant(trace[-1], profile, grid.r, tuple(trace), restarts)


def form_on_samples(N: int, grid: RadialGrid, potential, profiles) -> np.ndarray:
    """``int |u'|^2 - V u^2`` (angular factor included) for each ``(u, du)`` pair
    by element Gauss rules."""
    sq, wq, _ = gauss_points(grid, 10)
    rq = np.exp(sq).ravel()
    w = wq.ravel()
    Vs = potential.scaled(rq) if potential is not None else 0.0
    area = unit_sphere_area(N)
    out = []
    for u, du in profiles:
        uu, dd = u(rq), du(rq)
        out.append(area * float(np.sum(w * (dd * dd * rq ** N - Vs * uu * uu * rq ** (N - 2)))))
    return np.array(out)


@dataclass(frozen=True)
class HarmonicCheck:
    lhs: float
    rhs: float
    sector_sum: float
    direct_energy: float
    identity_gap: float
    theta: float
    holds: bool


def _zonal(m, N, x):
    """Zonal harmonic of degree ``m`` with unit mean square on the sphere."""
    lam = (N - 2) / 2
    # squared norm of C_m^lam against (1-x^2)^(lam-1/2), divided by the total weight
    xs, ws = roots_gegenbauer(max(m + 2, 8), lam)
    norm2 = float(np.sum(ws * eval_gegenbauer(m, lam, xs) ** 2) / np.sum(ws))
    return eval_gegenbauer(m, lam, x) / np.sqrt(norm2)


def _zonal_dtheta(m, N, x):
    # d/dtheta of the zonal harmonic is -sin(theta) * d/dx; returns the d/dx factor
    lam = (N - 2) / 2
    if m == 0:
        return np.zeros_like(x)
    xs, ws = roots_gegenbauer(max(m + 2, 8), lam)
    norm2 = float(np.sum(ws * eval_gegenbauer(m, lam, xs) ** 2) / np.sum(ws))
    return 2 * lam * eval_gegenbauer(m - 1, lam + 1, x) / np.sqrt(norm2)


def harmonic_improvement_check(N: int, sectors, potential, grid: RadialGrid,
                               rtol: float = 1e-8) -> HarmonicCheck:
    """Check the sector energy identity and the improved inequality for
    ``u = sum_m u_m(r) Z_m(x/|x|)`` with ``Z_m`` zonal harmonics.

    ``sectors`` is a list of ``(u_m, du_m)`` callables, index = degree.  The
    full energy is computed independently by a tensor Gauss rule in
    ``(r, cos theta)``; the improved inequality compares it with the radial
    energy plus ``(N-1)/(N-1+theta)`` times the nonradial gradient energy.
    """
    lam = (N - 2) / 2
    M = len(sectors) - 1
    sq, wq, _ = gauss_points(grid, 10)
    rq = np.exp(sq).ravel()
    w = wq.ravel()
    Vs = potential.scaled(rq) if potential is not None else np.zeros_like(rq)
    area = unit_sphere_area(N)
    theta = potential.theta(grid.r) if potential is not None else 0.0

    vals = [(u(rq), du(rq)) for u, du in sectors]
    grad_m, pot_m = [], []
    for m, (uu, dd) in enumerate(vals):
        grad_m.append(area * float(np.sum(w * (dd * dd + sector_constant(m, N) * uu * uu / rq ** 2) * rq ** N)))
        pot_m.append(area * float(np.sum(w * Vs * uu * uu * rq ** (N - 2))))
    sector_sum = sum(g - v for g, v in zip(grad_m, pot_m))

    xs, ws = roots_gegenbauer(2 * M + 8, lam)
    ws = ws / np.sum(ws)  # mean over the sphere
    Z = np.array([_zonal(m, N, xs) for m in range(M + 1)])
    dZ = np.array([_zonal_dtheta(m, N, xs) for m in range(M + 1)])
    U = np.array([v[0] for v in vals])
    dU = np.array([v[1] for v in vals])
    ur = dU.T @ Z  # (points_r, points_x)
    uval = U.T @ Z
    uth = (U.T @ dZ) * np.sqrt(1 - xs ** 2)[None, :]
    dens = ur ** 2 + uth ** 2 / rq[:, None] ** 2 - (Vs / rq ** 2)[:, None] * uval ** 2
    direct = area * float(np.sum(w * rq ** (N - 1) * (dens @ ws) * rq))
    gap = abs(direct - sector_sum) / max(abs(direct), abs(sector_sum), 1e-300)

    lhs = direct
    rhs = grad_m[0] - pot_m[0] + (N - 1) / (N - 1 + theta) * sum(grad_m[1:])
    holds = bool(gap <= rtol and lhs >= rhs - rtol * max(abs(lhs), abs(rhs), 1.0))
    return HarmonicCheck(lhs, rhs, sector_sum, direct, gap, theta, holds)
