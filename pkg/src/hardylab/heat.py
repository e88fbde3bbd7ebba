"""On-diagonal heat kernels of ``-Delta - V`` by spectral expansion per
harmonic sector, and the scaling bounds they are tested against.

In sector ``m`` the radial operator carries the extra potential
``c_m / r^2``.  Its eigenpairs (computed in the ground-state variable
``w = u / phi`` or in the log gauge) give::

    k_m(t, r) = sum_n exp(-lam_n t) u_n(r)^2,
    K(t, x, x) = sum_m d_m k_m(t, |x|) / (N omega_N),

with ``u_n`` orthonormal for ``r^(N-1) dr``.  Only modes with
``exp(-lam_n t_min) >= 1e-12`` are kept.
"""

from dataclasses import dataclass, field
from math import log, sqrt

import numpy as np

from .funcs import harmonic_dimension, sector_constant, unit_sphere_area
from .grids import (PositivityError, RadialDomain, RadialGrid, assemble, eigenpairs,
                    gauss_points, make_grid)

MODE_FLOOR = 1e-12
DECAY_DEPTH = 35.0


class UnderResolved(RuntimeError):
    """The requested smallest time needs more modes than the grid can resolve."""


def heat_grid(domain: RadialDomain, ds: float = 0.005, r_min: float = 1e-6) -> RadialGrid:
    """Log grid with spacing about ``ds`` in ``log r``."""
    if domain.kind == "whole":
        lo, hi = log(domain.r_min), log(domain.Rinf)
        return make_grid(domain, int(round((hi - lo) / ds)) + 1)
    top = domain.D
    n = int(round(log(top / r_min) / ds)) + 1
    return make_grid(domain, n, r_min / top)


@dataclass(frozen=True, eq=False)
class SectorKernel:
    """Diagonal kernel of one harmonic sector at the report nodes.

    ``values[i, j] = k_m(t[i], r[j])``.  With ``modes`` kept, ``vectors``
    holds the profiles ``u_n`` on the sector grid ``grid`` for off-diagonal
    evaluation.
    """

    m: int
    c_m: float
    d_m: int
    eigenvalues: np.ndarray = field(repr=False)
    t: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    inner_radius: float
    grid: RadialGrid | None = field(default=None, repr=False)
    vectors: np.ndarray | None = field(default=None, repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def mode_count(self) -> int:
        return self.eigenvalues.size

    def off_diagonal(self, t: float, ia, ib):
        """``k_m(t, r_a, r_b)`` between sector-grid node indices (needs modes)."""
        if self.vectors is None:
            raise ValueError("sector kernel was built without modes")
        e = np.exp(-self.eigenvalues * t)
        return (self.vectors[ia] * e) @ self.vectors[ib].T


def _report_indices(grid: RadialGrid, r):
    return grid.index_of(np.asarray(r, dtype=float))


def sector_diagonal(N: int, grid: RadialGrid, m: int, t, report_r, potential=None,
                    ground=None, t_min: float | None = None,
                    keep_modes: bool = False) -> SectorKernel:
    """Spectral diagonal kernel of sector ``m``.

    The sector grid starts where the centrifugal barrier makes every kept mode
    negligible: ``r_turn exp(-35 / sqrt(c_m))`` with ``r_turn^2 = c_m / lam_max``.
    Report radii are snapped to grid nodes (see ``SectorKernel.r``).

    Raises
    ------
    UnderResolved
        If the kept modes number half the nodes of ``grid`` or more.
    PositivityError
        If the sector form has a clearly negative eigenvalue.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    tmin = float(np.min(t)) if t_min is None else t_min
    lam_max = -log(MODE_FLOOR) / tmin
    c_m = float(sector_constant(m, N))
    d_m = harmonic_dimension(m, N)
    ridx = _report_indices(grid, report_r)
    r_nodes = grid.r[ridx]

    start = 0
    if c_m > 0:
        r_in = sqrt(c_m / lam_max) * np.exp(-DECAY_DEPTH / sqrt(c_m))
        start = int(np.searchsorted(grid.r, r_in))
    if grid.n - start < 16:
        empty = np.zeros((t.size, r_nodes.size))
        return SectorKernel(m, c_m, d_m, np.zeros(0), t, r_nodes, empty, float(grid.r[-1]))
    sg = grid.restrict(start) if start > 0 else grid
    op = assemble(N, sg, potential=potential, weight=ground, sector=m, outer="dirichlet")
    pairs = eigenpairs(op, upper=lam_max, fast=True)
    lam = pairs.values
    if lam.size and lam[0] < -1e-8 * lam_max:
        raise PositivityError(f"sector {m} form is negative: lowest eigenvalue {lam[0]:.6g}")
    if lam.size >= grid.n / 2:
        raise UnderResolved(
            f"sector {m}: {lam.size} modes on a {grid.n}-node grid; t_min={tmin:g} is under-resolved")
    # profiles u_n at all sector nodes: gauge times the mass-orthonormal vectors
    gauge = np.exp(op.log_gauge)
    local = ridx - start
    inside = local >= 0
    vals = np.zeros((t.size, r_nodes.size))
    if lam.size:
        free_pos = np.cumsum(op.free) - 1
        rows = np.zeros((lam.size, r_nodes.size))
        li = local[inside]
        ok = op.free[li]
        sel = np.where(inside)[0][ok]
        rows[:, sel] = (pairs.vectors[free_pos[li[ok]], :] * gauge[li[ok], None]).T
        vals = np.exp(-np.outer(t, lam)) @ (rows ** 2)
    vectors = weights = None
    if keep_modes and lam.size:
        vectors = np.zeros((sg.n, lam.size))
        vectors[op.free] = pairs.vectors * gauge[op.free, None]
        weights = np.zeros(sg.n)
        # lumped r^(N-1) dr: the profiles are orthonormal against these
        weights[op.free] = op.mass * np.exp(-2 * op.log_gauge[op.free])
    return SectorKernel(m, c_m, d_m, lam, t, r_nodes, vals, float(sg.r[0]),
                        sg if keep_modes else None, vectors, weights)


@dataclass(frozen=True, eq=False)
class DiagonalKernel:
    """``K(t, r)`` summed over sectors ``0..M``.

    ``tail_estimate`` is the largest relative size of the geometric tail
    extrapolated from the last two sector contributions;
    ``cutoff_insufficient`` flags a tail above 1%.
    """

    N: int
    t: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    M: int
    tail_estimate: float
    cutoff_insufficient: bool
    sector_mode_counts: tuple = ()


def assemble_diagonal(N: int, sectors) -> DiagonalKernel:
    """Sum precomputed sector kernels with multiplicities ``d_m / (N omega_N)``."""
    sectors = sorted(sectors, key=lambda s: s.m)
    area = unit_sphere_area(N)
    K = np.zeros_like(sectors[0].values)
    contribs = []
    for sk in sectors:
        c = sk.d_m * sk.values / area
        contribs.append(c)
        K = K + c
    tail = _tail(contribs, K)
    return DiagonalKernel(N, sectors[0].t, sectors[0].r, K, sectors[-1].m, tail, tail > 0.01,
                          tuple(s.mode_count for s in sectors))


def _tail(contribs, K):
    if len(contribs) < 2:
        return 0.0 if len(contribs) == 1 and np.all(contribs[0] == 0) else float("inf")
    last, prev = contribs[-1], contribs[-2]
    if np.all(last == 0):
        return 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(prev > 0, last / prev, np.inf)
        q = np.where(last == 0, 0.0, q)
        tail = np.where(q < 1, last * q / (1 - q), np.inf)
        rel = np.where(K > 0, tail / K, 0.0)
    return float(np.max(rel))


def diagonal_kernel(N: int, grid: RadialGrid, t, report_r, potential=None, ground=None,
                    sectors: int | None = None, sector_tol: float = 1e-5,
                    max_sectors: int = 4000) -> DiagonalKernel:
    """Diagonal kernel with the sector cutoff chosen adaptively.

    Sectors are added until the newest contribution is below ``sector_tol``
    relative to the partial sum at every report point and decreasing, or
    until a sector has no mode below the cutoff eigenvalue (all higher
    sectors are then empty as well).  A fixed ``sectors`` overrides the rule.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    area = unit_sphere_area(N)
    K = None
    contribs = []
    counts = []
    stop = max_sectors if sectors is None else sectors
    m_last = 0
    for m in range(stop + 1):
        sk = sector_diagonal(N, grid, m, t, report_r, potential, ground)
        c = sk.d_m * sk.values / area
        K = c.copy() if K is None else K + c
        contribs.append(c)
        counts.append(sk.mode_count)
        m_last = m
        r_nodes = sk.r
        if sk.mode_count == 0 and m > 0:
            break
        if sectors is None and m >= 2:
            with np.errstate(divide="ignore", invalid="ignore"):
                rel = np.where(K > 0, c / K, 0.0)
            if np.max(rel) < sector_tol and np.all(c <= contribs[-2] + 1e-300):
                break
    tail = _tail(contribs, K)
    return DiagonalKernel(N, t, r_nodes, K, m_last, tail, tail > 0.01, tuple(counts))


BOUND_KINDS = ("free", "critical-bounded", "subcritical-bounded", "subcritical-negative-lambda",
               "whole-space-V_eps", "log-refined-bounded", "log-refined-whole-space")


@dataclass(frozen=True, eq=False)
class BoundReport:
    kind: str
    sup_ratio: float
    inf_ratio: float
    ratios: np.ndarray = field(repr=False)
    passed: bool
    argmax: tuple


def envelope(kind: str, N: int, t, r, ground=None, alpha: float | None = None):
    """Spatial factor of a bound, evaluated on the ``(t, r)`` product grid."""
    t = np.asarray(t, dtype=float)[:, None]
    r = np.asarray(r, dtype=float)[None, :]
    half = (N - 2) / 2
    ones = np.ones((t.shape[0], r.shape[1]))
    if kind == "free":
        return ones
    if kind == "critical-bounded":
        return ones * r ** (-half)
    if kind == "subcritical-bounded":
        return ones * r ** (-alpha)
    if kind == "subcritical-negative-lambda":
        return np.minimum(1.0, (r / np.sqrt(t)) ** (-alpha))
    if kind == "whole-space-V_eps":
        return ones * np.maximum(r ** (-half), 1.0)
    if kind in ("log-refined-bounded", "log-refined-whole-space"):
        return ones * ground.value(r.ravel())[None, :]
    raise ValueError(f"unknown bound kind {kind!r}")


def check_bound(kernel: DiagonalKernel, kind: str, ground=None, alpha: float | None = None,
                threshold: float = np.inf) -> BoundReport:
    """``sup K t^(N/2) / envelope^2`` over the report grid.

    ``inf_ratio`` is the infimum of the same ratio on ``r <= sqrt(t)``
    (sharpness indicator, reported only).
    """
    if kind not in BOUND_KINDS:
        raise ValueError(f"unknown bound kind {kind!r}")
    N = kernel.N
    env = envelope(kind, N, kernel.t, kernel.r, ground, alpha)
    ratio = kernel.values * kernel.t[:, None] ** (N / 2) / env ** 2
    j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    sup = float(ratio[j])
    near = kernel.r[None, :] <= np.sqrt(kernel.t)[:, None]
    inf = float(np.min(ratio[near])) if np.any(near) else float("nan")
    passed = bool(np.isfinite(sup) and sup <= threshold)
    return BoundReport(kind, sup, inf, ratio, passed, (float(kernel.t[j[0]]), float(kernel.r[j[1]])))


def exponent_check(kernel: DiagonalKernel, alpha: float) -> float:
    """``sup K_phi t^(N/2 - alpha)`` with ``phi = r^(-alpha)``."""
    N = kernel.N
    phi2 = kernel.r[None, :] ** (-2 * alpha)
    return float(np.max(kernel.values / phi2 * kernel.t[:, None] ** (N / 2 - alpha)))


@dataclass(frozen=True)
class StabilityReport:
    sups: tuple  # (base, refined grid, doubled sectors)
    refine_change: float
    sector_change: float
    stable: bool
    tail_estimate: float


def bound_stability(build, kind: str, ground_for=None, alpha=None, rtol: float = 0.10,
                    value=None) -> StabilityReport:
    """Run ``build(refine: bool, sectors: int | None) -> (DiagonalKernel, ground)``
    on the base grid, a refined grid and with twice the adaptive sector
    cutoff, and compare the suprema of the chosen quantity.

    ``value(kernel, ground)`` defaults to ``check_bound(...).sup_ratio``.
    """
    def measure(kernel, ground):
        if value is not None:
            return value(kernel, ground)
        return check_bound(kernel, kind, ground, alpha).sup_ratio

    k0, g0 = build(False, None)
    k1, g1 = build(True, None)
    k2, g2 = build(False, 2 * max(k0.M, 1))
    s0, s1, s2 = measure(k0, g0), measure(k1, g1), measure(k2, g2)
    c1 = abs(s1 - s0) / abs(s0)
    c2 = abs(s2 - s0) / abs(s0)
    stable = bool(np.isfinite(s0) and c1 < rtol and c2 < rtol)
    return StabilityReport((s0, s1, s2), c1, c2, stable, max(k0.tail_estimate, k1.tail_estimate))


@dataclass(frozen=True)
class SemigroupCheck:
    max_violation: float
    chapman_kolmogorov: float
    cauchy_schwarz: float
    monotone_in_t: bool


def semigroup_check(sector: SectorKernel, t: float, pairs) -> SemigroupCheck:
    """Chapman-Kolmogorov and Cauchy-Schwarz checks for one sector.

    ``pairs`` are radii ``(r, s)``, snapped to sector-grid nodes.  The
    composition integral uses the lumped quadrature of the sector grid.
    """
    if sector.vectors is None:
        raise ValueError("build the sector kernel with keep_modes=True")
    g = sector.grid
    ia = g.index_of([p[0] for p in pairs])
    ib = g.index_of([p[1] for p in pairs])
    direct = np.diag(sector.off_diagonal(t, ia, ib))
    e = np.exp(-sector.eigenvalues * t / 2)
    Ka = (sector.vectors[ia] * e) @ sector.vectors.T
    Kb = (sector.vectors[ib] * e) @ sector.vectors.T
    composed = np.sum(Ka * Kb * sector.weights[None, :], axis=1)
    scale = np.maximum(np.abs(direct), 1e-300)
    ck = float(np.max(np.abs(composed - direct) / scale))
    daa = np.diag(sector.off_diagonal(t, ia, ia))
    dbb = np.diag(sector.off_diagonal(t, ib, ib))
    cs = float(np.max(np.maximum(np.abs(direct) - np.sqrt(daa * dbb), 0.0) / np.sqrt(daa * dbb)))
    later = np.diag(sector.off_diagonal(2 * t, ia, ia))
    return SemigroupCheck(max(ck, cs), ck, cs, bool(np.all(later <= daa * (1 + 1e-12))))


@dataclass(frozen=True)
class TransformCheck:
    max_relative_gap: float
    direct: np.ndarray = field(repr=False)
    transformed: np.ndarray = field(repr=False)


def random_profiles(rng, count: int, R: float, terms: int = 4):
    """Random smooth radial profiles supported in ``[0, R)``.

    Each is ``(1 - (r/R)^2)^3 * poly(r/R)`` with Gaussian coefficients;
    returns ``(u, du)`` callable pairs.
    """
    out = []
    for _ in range(count):
        c = rng.normal(size=terms)
        dc = np.polynomial.polynomial.polyder(c)

        def u(r, c=c):
            x = np.asarray(r) / R
            return np.where(x < 1, (1 - x * x) ** 3, 0.0) * np.polynomial.polynomial.polyval(x, c)

        def du(r, c=c, dc=dc):
            x = np.asarray(r) / R
            b = np.where(x < 1, (1 - x * x) ** 3, 0.0)
            db = np.where(x < 1, -6 * x * (1 - x * x) ** 2, 0.0)
            return (db * np.polynomial.polynomial.polyval(x, c)
                    + b * np.polynomial.polynomial.polyval(x, dc)) / R

        out.append((u, du))
    return out


def ground_transform_check(N: int, potential, ground, grid: RadialGrid, profiles) -> TransformCheck:
    """Compare ``int |grad u|^2 - V u^2`` with ``int |grad w|^2 phi^2`` for
    ``u = phi w``.

    ``profiles`` are ``(u, du)`` pairs of smooth compactly supported functions;
    ``w = u / phi`` so that both sides are finite for critical ``phi``.
    """
    sq, wq, _ = gauss_points(grid, 10)
    rq = np.exp(sq).ravel()
    w = wq.ravel()
    Vs = potential.scaled(rq)
    dlog = ground.log_derivative(rq)
    area = unit_sphere_area(N)
    direct, transformed = [], []
    for u, du in profiles:
        uu, dd = u(rq), du(rq)
        direct.append(area * float(np.sum(w * (dd * dd * rq ** N - Vs * uu * uu * rq ** (N - 2)))))
        # phi^2 (w')^2 = (u' - u phi'/phi)^2
        transformed.append(area * float(np.sum(w * (dd - uu * dlog) ** 2 * rq ** N)))
    direct = np.array(direct)
    transformed = np.array(transformed)
    gap = np.abs(direct - transformed) / np.maximum(np.abs(direct), np.abs(transformed))
    return TransformCheck(float(np.max(gap)), direct, transformed)
