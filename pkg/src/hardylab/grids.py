"""Log-radial grids, quadrature and finite-element assembly of radial forms.

Nodes are uniform in ``s = log r``.  A grid function ``x`` represents the
radial profile ``u = g(r) x`` where the gauge ``g`` is either ``r**(-a)`` or a
ground state ``phi``.  With ``g = r**(-(N-2)/2)`` every inverse-square
coefficient becomes constant in ``s``, which is what makes grids reaching
``r = 1e-300`` usable.

Conventions for a sector-``m`` form with angular factor divided out::

    numerator   = int (|u'|^2 + (c_m/r^2 - V) u^2) r^(N-1) dr + sign*alpha*R^(N-2) u(R)^2
    denominator = int W u^2 r^(N-1) dr

The gradient part is integrated exactly per element by Gauss-Legendre rules;
potential and mass terms are lumped (trapezoid in ``s``).
"""

from dataclasses import dataclass, field
from math import log

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.sparse import diags
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .funcs import sector_constant, unit_sphere_area

GAUSS_ORDER = 6
_TINY_TOL = 1e-300
STEMR_MAX_NODES = 8000
FAST_RESIDUAL_LIMIT = 1e-10


class PositivityError(ValueError):
    """A weight or form that must be positive is not."""


@dataclass(frozen=True)
class RadialDomain:
    """Ball, annulus, truncated exterior or truncated whole space."""

    kind: str
    R: float = 1.0
    a: float | None = None
    b: float | None = None
    Rinf: float | None = None
    r_min: float | None = None

    def __post_init__(self):
        k = self.kind
        if k == "ball":
            ok = self.R > 0
        elif k == "annulus":
            ok = self.a is not None and 0 < self.a < self.b
        elif k == "exterior":
            ok = self.R > 0 and self.Rinf is not None and self.Rinf > self.R
        elif k == "whole":
            ok = self.r_min is not None and self.Rinf is not None and 0 < self.r_min < 1 < self.Rinf
        else:
            raise ValueError(f"unknown domain kind {k!r}")
        if not ok:
            raise ValueError(f"inconsistent {k} domain: {self}")

    @classmethod
    def ball(cls, R=1.0):
        return cls("ball", R=R)

    @classmethod
    def annulus(cls, a, b):
        return cls("annulus", R=b, a=a, b=b)

    @classmethod
    def exterior(cls, R=1.0, Rinf=1e3):
        return cls("exterior", R=R, Rinf=Rinf)

    @classmethod
    def whole(cls, r_min=1e-6, Rinf=1e3):
        return cls("whole", R=Rinf, r_min=r_min, Rinf=Rinf)

    @property
    def D(self) -> float:
        """``sup |x|`` for bounded kinds, the truncation radius otherwise."""
        return self.b if self.kind == "annulus" else (self.Rinf if self.Rinf else self.R)

    @property
    def boundary_conditions(self):
        """(inner, outer) conditions: 'natural', 'robin' or 'dirichlet'."""
        return {
            "ball": ("natural", "robin"),
            "annulus": ("natural", "robin"),
            "exterior": ("robin", "dirichlet"),
            "whole": ("natural", "dirichlet"),
        }[self.kind]

    @property
    def boundary_sign(self) -> float:
        """+1 for the interior convention, -1 for the exterior one."""
        return -1.0 if self.kind == "exterior" else 1.0


@dataclass(frozen=True, eq=False)
class RadialGrid:
    domain: RadialDomain
    s: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.s.size

    @property
    def r(self):
        return np.exp(self.s)

    @property
    def h(self):
        return np.diff(self.s)

    @property
    def trapezoid(self):
        """Per-node weights of the trapezoid rule in ``s``."""
        h = self.h
        w = np.zeros(self.n)
        w[:-1] += h / 2
        w[1:] += h / 2
        return w

    def quad_weights(self, N: int):
        """Weights for ``int F r^(N-1) dr`` (angular factor excluded)."""
        return self.trapezoid * np.exp(N * self.s)

    @property
    def boundary_conditions(self):
        return self.domain.boundary_conditions

    def refine(self) -> "RadialGrid":
        """Halve every cell; the old nodes are kept."""
        mid = 0.5 * (self.s[1:] + self.s[:-1])
        s = np.empty(2 * self.n - 1)
        s[0::2] = self.s
        s[1::2] = mid
        return RadialGrid(self.domain, s)

    def restrict(self, start: int) -> "RadialGrid":
        """Grid made of nodes ``start:`` (used to cut inner regions)."""
        return RadialGrid(self.domain, self.s[start:])

    def index_of(self, r):
        return np.abs(self.s[:, None] - np.log(np.atleast_1d(r))[None, :]).argmin(axis=0)


def make_grid(dom: RadialDomain, n: int, r_min_fraction: float = 1e-6) -> RadialGrid:
    """Geometric grid with ``n`` nodes.

    ``make_grid(dom, 2n-1)`` nests ``make_grid(dom, n)`` for single-piece
    domains; ``RadialGrid.refine`` nests for every domain.  Whole-space grids
    always contain ``r = 1`` so that potentials switching there are resolved.
    """
    if n < 16:
        raise ValueError(f"need at least 16 nodes, got {n}")
    if not 0 < r_min_fraction <= 1e-2:
        raise ValueError(f"r_min_fraction must lie in (0, 1e-2], got {r_min_fraction}")
    k = dom.kind
    if k == "ball":
        s = np.linspace(log(dom.R * r_min_fraction), log(dom.R), n)
    elif k == "annulus":
        s = np.linspace(log(dom.a), log(dom.b), n)
    elif k == "exterior":
        s = np.linspace(log(dom.R), log(dom.Rinf), n)
    else:
        lo, hi = log(dom.r_min), log(dom.Rinf)
        cells = n - 1
        c_in = min(max(1, round(cells * -lo / (hi - lo))), cells - 1)
        s = np.concatenate([np.linspace(lo, 0.0, c_in + 1),
                            np.linspace(0.0, hi, cells - c_in + 1)[1:]])
    s[-1] = log(dom.D) if k != "whole" else log(dom.Rinf)
    return RadialGrid(dom, s)


_MEASURE_SHIFT = {"volume": 0, "hardy": -2}


def quadrature(grid: RadialGrid, values, measure="volume", N: int = 3, weight=None) -> float:
    """Trapezoid (in ``log r``) value of ``int values dmu`` over the grid.

    ``measure`` is ``"volume"`` (``dx``), ``"hardy"`` (``dx/|x|^2``) or
    ``"weighted"`` (``phi^2 dx`` with ``weight`` a ground state).  The angular
    factor ``N omega_N`` is included.  Pass ``u**2`` to get squared norms.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != grid.s.shape:
        raise ValueError("values must be given at every node")
    if measure in _MEASURE_SHIFT:
        logw = (N + _MEASURE_SHIFT[measure]) * grid.s
    elif measure == "weighted":
        if weight is None:
            raise ValueError("weighted measure needs a ground state")
        logw = N * grid.s + 2 * weight.log_value(grid.r)
    else:
        raise ValueError(f"unknown measure {measure!r}")
    return unit_sphere_area(N) * float(np.sum(grid.trapezoid * values * np.exp(logw)))


def gauss_points(grid: RadialGrid, order: int = GAUSS_ORDER):
    """Element Gauss points.  Returns ``(s_q, w_q, xi)`` with shapes
    ``(cells, order)``, ``(cells, order)`` and ``(order,)``; ``xi`` in [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    xi = 0.5 * (x + 1)
    h = grid.h[:, None]
    return grid.s[:-1, None] + h * xi[None, :], h * 0.5 * w[None, :], xi


@dataclass(frozen=True, eq=False)
class WeightedOperator:
    """Tridiagonal numerator and diagonal denominator of a radial quotient.

    Arrays live on the free nodes (Dirichlet nodes removed); ``free`` maps them
    back onto the grid.  ``log_gauge`` holds ``log g`` at all nodes.
    """

    N: int
    grid: RadialGrid
    free: np.ndarray
    stiff_diag: np.ndarray
    stiff_off: np.ndarray
    potential: np.ndarray
    mass: np.ndarray
    boundary_index: int | None
    boundary_value: float
    log_gauge: np.ndarray = field(repr=False)

    @property
    def diag(self):
        d = self.stiff_diag + self.potential
        if self.boundary_index is not None:
            d = d.copy()
            d[self.boundary_index] += self.boundary_value
        return d

    @property
    def off(self):
        return self.stiff_off

    def apply(self, x):
        d, e = self.diag, self.off
        y = d * x
        y[:-1] += e * x[1:]
        y[1:] += e * x[:-1]
        return y

    def energy(self, x) -> float:
        return float(x @ self.apply(x))

    def norm2(self, x) -> float:
        return float(np.sum(self.mass * x * x))

    def quotient(self, x) -> float:
        return self.energy(x) / self.norm2(x)

    def expand(self, x):
        """Grid function on all nodes (zeros on Dirichlet nodes)."""
        full = np.zeros(self.grid.n)
        full[self.free] = x
        return full

    def to_profile(self, x):
        """Radial profile ``u = g x`` at every node."""
        return np.exp(self.log_gauge) * self.expand(x)

    def sparse(self):
        return diags([self.off, self.diag, self.off], [-1, 0, 1], format="csc")


def _log_base(N, grid_s, log_gauge_vals):
    # log of r^(N-2) g^2
    return (N - 2) * grid_s + 2 * log_gauge_vals


def assemble(N: int, grid: RadialGrid, potential=None, weight=None,
             boundary_coefficient: float = 0.0, denominator=None, sector: int = 0,
             gauge: float | None = None, lumped: bool = True,
             outer: str | None = None) -> WeightedOperator:
    """Assemble a sector-``m`` radial quotient on ``grid``.

    Parameters
    ----------
    potential : RadialPotential, optional
        Subtracted in the numerator.  Ignored when ``weight`` is given: the
        ground state absorbs it and the numerator becomes the weighted
        Dirichlet form ``int |w'|^2 phi^2 r^(N-1) dr``.
    weight : GroundState, optional
        Work in the variable ``w = u / phi``.
    boundary_coefficient : float
        ``alpha`` of the boundary term at the Robin end; its sign follows the
        domain convention.
    denominator : RadialPotential, optional
        Weight ``W`` of the denominator; defaults to ``W = 1`` (plain L^2).
    gauge : float, optional
        Exponent ``a`` of ``u = r**(-a) x`` when no weight is given; defaults
        to ``(N-2)/2``.
    lumped : bool
        Lump the potential term onto the diagonal (default).  Otherwise it is
        integrated by the element Gauss rule, so the discrete form is the
        continuous form restricted to piecewise-linear functions and coarse
        grids give exact upper bounds for refined ones.
    outer : {"dirichlet", "robin"}, optional
        Override the outer boundary condition of the domain (heat kernels on
        bounded domains use Dirichlet).
    """
    s = grid.s
    r = grid.r
    if weight is not None:
        a = 0.0
        log_g = weight.log_value(r)
        if not np.all(np.isfinite(log_g)):
            raise PositivityError("weight must be positive on the grid")
        sq, wq, xi = gauss_points(grid)
        rq = np.exp(sq)
        log_gq = weight.log_value(rq.ravel()).reshape(sq.shape)
    else:
        a = (N - 2) / 2 if gauge is None else gauge
        log_g = -a * s
        sq, wq, xi = gauss_points(grid)
        rq = np.exp(sq)
        log_gq = -a * sq
    pq = np.exp(_log_base(N, sq, log_gq))

    # element matrices of int P (x_s - a x)^2 ds
    h = grid.h[:, None]
    d0 = -1.0 / h - a * (1 - xi)[None, :]
    d1 = 1.0 / h - a * xi[None, :]
    k00 = np.sum(wq * pq * d0 * d0, axis=1)
    k01 = np.sum(wq * pq * d0 * d1, axis=1)
    k11 = np.sum(wq * pq * d1 * d1, axis=1)
    if np.any(k00 < 0) or np.any(k11 < 0):
        raise PositivityError("gradient weight is negative")
    stiff_diag = np.zeros(grid.n)
    stiff_diag[:-1] += k00
    stiff_diag[1:] += k11
    stiff_off = k01.copy()

    base = np.exp(_log_base(N, s, log_g))
    trap = grid.trapezoid
    coeff = np.full(grid.n, float(sector_constant(sector, N)))
    if weight is None and potential is not None:
        coeff = coeff - potential.scaled(r)
    pot = trap * coeff * base
    if not lumped:
        cq = np.full(sq.shape, float(sector_constant(sector, N)))
        if weight is None and potential is not None:
            cq = cq - potential.scaled(rq.ravel()).reshape(sq.shape)
        wc = wq * cq * pq
        stiff_diag[:-1] += np.sum(wc * (1 - xi) ** 2, axis=1)
        stiff_diag[1:] += np.sum(wc * xi ** 2, axis=1)
        stiff_off += np.sum(wc * xi * (1 - xi), axis=1)
        pot = np.zeros(grid.n)
    if denominator is None:
        mass = trap * np.exp(2 * s) * base
    else:
        mass = trap * denominator.scaled(r) * base
        if np.any(mass < 0):
            raise PositivityError("denominator weight must be nonnegative")

    inner_bc, outer_bc = grid.boundary_conditions
    if outer is not None:
        if outer not in ("dirichlet", "robin"):
            raise ValueError(f"unknown outer condition {outer!r}")
        outer_bc = outer
    free = np.ones(grid.n, dtype=bool)
    if inner_bc == "dirichlet":
        free[0] = False
    if outer_bc == "dirichlet":
        free[-1] = False
    bidx = None
    bval = 0.0
    if boundary_coefficient != 0.0:
        end = 0 if inner_bc == "robin" else (grid.n - 1 if outer_bc == "robin" else None)
        if end is None:
            raise ValueError("domain has no Robin boundary for the boundary term")
        # alpha R^(N-2) u(R)^2 = alpha R^(N-2) g(R)^2 x^2 = alpha * base(R) x^2
        bval = grid.domain.boundary_sign * boundary_coefficient * base[end]
        bidx = int(np.cumsum(free)[end] - 1)

    keep_off = free[:-1] & free[1:]
    return WeightedOperator(
        N=N, grid=grid, free=free,
        stiff_diag=stiff_diag[free], stiff_off=stiff_off[keep_off],
        potential=pot[free], mass=mass[free],
        boundary_index=bidx, boundary_value=bval, log_gauge=log_g)


@dataclass(frozen=True, eq=False)
class Eigenpairs:
    values: np.ndarray
    vectors: np.ndarray  # mass-orthonormal columns on the free nodes
    residuals: np.ndarray


def _driver(n, fast):
    # MRRR is faster but its wrapper allocates an n-by-n workspace and it lost
    # accuracy on pencils whose mass decays over many decades; bisection with
    # a tiny absolute tolerance is the safe default
    if fast and n <= STEMR_MAX_NODES:
        return {"lapack_driver": "stemr"}
    return {"lapack_driver": "stebz", "tol": _TINY_TOL}


def eigenpairs(op: WeightedOperator, count: int = 1, upper: float | None = None,
               fast: bool = False) -> Eigenpairs:
    """Lowest eigenpairs of the pencil ``(A, M)``.

    With ``upper`` set, every eigenvalue below it is returned instead of a
    fixed count.  A positive lumped mass is folded into a symmetric
    tridiagonal matrix and handed to LAPACK bisection with a tiny absolute
    tolerance, which keeps relative accuracy on strongly graded pencils.
    ``fast`` switches to MRRR on grids of moderate size; it is only safe for
    pencils whose mass does not decay by many orders of magnitude.  A
    mass with zero entries falls back to Lanczos on the reciprocal pencil.
    """
    pairs = _eigenpairs(op, count, upper, fast)
    if fast and pairs.residuals.size and np.max(pairs.residuals) > FAST_RESIDUAL_LIMIT:
        # MRRR occasionally returns an unconverged pair for narrow windows
        pairs = _eigenpairs(op, count, upper, False)
    return pairs


def _eigenpairs(op, count, upper, fast):
    d, e, m = op.diag, op.off, op.mass
    if np.all(m > 0):
        sq = 1.0 / np.sqrt(m)
        D = d * sq * sq
        E = e * sq[:-1] * sq[1:]
        if upper is None:
            count = min(count, D.size)
            w, v = eigh_tridiagonal(D, E, select="i", select_range=(0, count - 1), **_driver(D.size, fast))
        else:
            lo = np.min(D) - 2 * np.max(np.abs(E), initial=0.0) - 1.0
            w, v = eigh_tridiagonal(D, E, select="v", select_range=(lo, upper), **_driver(D.size, fast))
        x = v * sq[:, None]
    else:
        if np.all(m == 0):
            raise PositivityError("denominator vanishes identically on the grid")
        if upper is not None:
            raise ValueError("eigenvalue windows need a positive mass")
        A = op.sparse()
        M = diags(m, format="csc")
        k = min(count, np.count_nonzero(m) - 1) if np.count_nonzero(m) > 1 else 1
        lu = splu(A)
        n = d.size
        minv = LinearOperator((n, n), matvec=lu.solve)
        theta, x = eigsh(M, k=k, M=A, Minv=minv, which="LA")
        order = np.argsort(-theta)
        theta, x = theta[order], x[:, order]
        if np.any(theta <= 0):
            raise PositivityError("numerator is not positive definite")
        w = 1.0 / theta
        x = x / np.sqrt(np.sum(m[:, None] * x * x, axis=0))
    res = np.empty(w.size)
    scale = np.max(np.abs(d)) + 2 * np.max(np.abs(e), initial=0.0)
    for j in range(w.size):
        xj = x[:, j]
        rj = op.apply(xj) - w[j] * m * xj
        res[j] = np.linalg.norm(rj) / (scale * np.linalg.norm(xj))
    return Eigenpairs(w, x, res)


def gauss_form(N: int, grid: RadialGrid, u, du, V=None, order: int = 10) -> float:
    """``int (u'^2 - V u^2) r^(N-1) dr`` by element Gauss rules in ``s``.

    ``u``/``du`` map a radius array to the profile and its ``r``-derivative;
    ``V`` is a potential (anything with ``scaled``).  The angular factor is
    excluded.
    """
    sq, wq, _ = gauss_points(grid, order)
    rq = np.exp(sq).ravel()
    uu, dd = u(rq), du(rq)
    integrand = dd * dd * rq ** N
    if V is not None:
        integrand = integrand - V.scaled(rq) * uu * uu * rq ** (N - 2)
    return float(np.sum(wq.ravel() * integrand))
