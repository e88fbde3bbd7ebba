"""Iterated logarithms, critical exponents, harmonic-sector constants and the
Kelvin energy identity for radial profiles.

All functions accept scalars or numpy arrays and are pure.
"""

from dataclasses import dataclass
from math import comb, gamma, pi

import numpy as np


@dataclass(frozen=True)
class Dimension:
    """Space dimension together with the constants that depend only on it."""

    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise ValueError(f"dimension must be an integer >= 3, got {self.N}")

    @property
    def surface_area(self) -> float:
        """Area of the unit sphere, ``N * omega_N``."""
        return unit_sphere_area(self.N)

    @property
    def half(self) -> float:
        """The critical exponent ``(N-2)/2``."""
        return (self.N - 2) / 2

    @property
    def hardy(self) -> float:
        """The critical Hardy constant ``((N-2)/2)**2``."""
        return self.half ** 2


def unit_sphere_area(N: int) -> float:
    return 2 * pi ** (N / 2) / gamma(N / 2)


def _as_float_array(t):
    return np.asarray(t, dtype=float)


def _x1(t):
    # log1p(t - 1) keeps full precision as t -> 1 where X_1 -> 1
    t = _as_float_array(t)
    near = t > 0.5
    logt = np.where(near, np.log1p(np.where(near, t - 1.0, 0.0)),
                    np.log(np.where(near, 1.0, t)))
    return 1.0 / (1.0 - logt)


def eval_xk(k: int, t):
    """Iterated logarithm ``X_k(t)`` for ``0 < t <= 1``.

    ``X_1(t) = 1 / (1 - log t)`` and ``X_{k+1} = X_1(X_k)``.

    Raises
    ------
    ValueError
        If ``k < 1`` or any ``t`` lies outside ``(0, 1]``.
    """
    if k < 1:
        raise ValueError(f"depth k must be >= 1, got {k}")
    t = _as_float_array(t)
    if np.any(~(t > 0)) or np.any(t > 1):
        raise ValueError("X_k is defined for 0 < t <= 1")
    x = t
    for _ in range(k):
        x = _x1(x)
    return x[()] if x.ndim == 0 else x


def xk_products(k: int, t):
    """Return the list ``[X_1(t), ..., X_k(t)]`` computed in one recursion."""
    t = _as_float_array(t)
    if np.any(~(t > 0)) or np.any(t > 1):
        raise ValueError("X_k is defined for 0 < t <= 1")
    out = []
    x = t
    for _ in range(k):
        x = _x1(x)
        out.append(x)
    return out


def eval_yk(k: int, r):
    """``Y_k(r) = X_k(1/r)`` for ``r >= 1``."""
    r = _as_float_array(r)
    if np.any(r < 1):
        raise ValueError("Y_k is defined for r >= 1")
    return eval_xk(k, 1.0 / r)


def eval_xk_tilde(k: int, r):
    """``X_k(r)`` inside the unit ball, 1 outside."""
    r = _as_float_array(r)
    if np.any(~(r > 0)):
        raise ValueError("r must be positive")
    inside = r < 1
    out = np.ones_like(r)
    if np.any(inside):
        out[inside] = eval_xk(k, r[inside])
    return out[()] if out.ndim == 0 else out


def eval_yk_tilde(k: int, r):
    """``Y_k(r)`` outside the unit ball, 1 inside."""
    r = _as_float_array(r)
    return eval_xk_tilde(k, 1.0 / r)


def eval_xk_derivative(k: int, a: float, r, D: float = 1.0, variant: str = "x"):
    """Analytic derivative of ``X_k(r/D)**a`` (or ``Y_k(r)**a``).

    Uses ``d/dr X_k^a = (a/r) X_1 ... X_{k-1} X_k^(a+1)`` on ``0 < r <= D`` and
    ``d/dr Y_k^a = -(a/r) Y_1 ... Y_{k-1} Y_k^(a+1)`` on ``r > 1``.
    """
    r = _as_float_array(r)
    if variant == "x":
        if np.any(~(r > 0)) or np.any(r > D):
            raise ValueError("X-rule is valid for 0 < r <= D")
        xs = xk_products(k, r / D)
        sign = 1.0
    elif variant == "y":
        if np.any(~(r > 1)):
            raise ValueError("Y-rule is valid for r > 1 only")
        xs = xk_products(k, 1.0 / r)
        sign = -1.0
    else:
        raise ValueError(f"unknown variant {variant!r}")
    prod = np.ones_like(r)
    for x in xs[:-1]:
        prod = prod * x
    out = sign * a / r * prod * xs[-1] ** (a + 1)
    return out[()] if out.ndim == 0 else out


def exponent_from_lambda(lam: float, N: int) -> float:
    """Smallest root ``alpha`` of ``alpha (N - 2 - alpha) = lam``."""
    half = (N - 2) / 2
    disc = half * half - lam
    if disc < -1e-14 * max(1.0, half * half):
        raise ValueError(f"lambda={lam} exceeds the critical value {half * half}")
    return half - np.sqrt(max(disc, 0.0))


def beta_from_mu(mu: float) -> float:
    """Largest root of ``beta (1 - beta) = mu`` for ``0 < mu <= 1/4``."""
    if not 0 < mu <= 0.25:
        raise ValueError(f"mu must lie in (0, 1/4], got {mu}")
    return 0.5 + np.sqrt(max(0.25 - mu, 0.0))


def sector_constant(m: int, N: int) -> int:
    """Laplace-Beltrami eigenvalue ``c_m = m (N - 2 + m)``."""
    return m * (N - 2 + m)


def harmonic_dimension(m: int, N: int) -> int:
    """Dimension of the space of degree-``m`` spherical harmonics in ``R^N``."""
    if m < 0:
        raise ValueError("degree must be nonnegative")
    if m < 2:
        return 1 if m == 0 else N
    return comb(m + N - 1, N - 1) - comb(m + N - 3, N - 1)


@dataclass(frozen=True)
class KelvinCheck:
    lhs: float
    rhs: float
    gradient_term: float
    boundary_term: float
    truncation_term: float
    discrepancy: float


def kelvin_energy_check(N: int, r, u, decay_margin: float = 0.0) -> KelvinCheck:
    """Compare both sides of the Kelvin energy identity for a radial profile.

    ``u`` is tabulated on increasing nodes ``r`` of the exterior domain
    ``[r[0], r[-1]]`` with ``r[0] = 1`` and treated as piecewise linear.  The
    inverted profile is ``v(rho) = rho**(2-N) u(1/rho)`` on
    ``[1/r[-1], 1]``, again piecewise linear on the inverted nodes.  The
    truncated identity carries an extra inner-sphere term
    ``-(N-2) rho_0**(N-2) v(rho_0)**2`` which vanishes when ``u(r[-1]) = 0``.

    Raises
    ------
    ValueError
        If the profile does not decay faster than ``r**(-(N-2)/2)`` over the
        last decade of the grid, so that the energy would diverge.
    """
    r = _as_float_array(r)
    u = _as_float_array(u)
    if r.shape != u.shape or r.ndim != 1 or r.size < 3:
        raise ValueError("r and u must be 1-D arrays of equal length >= 3")
    if not np.isclose(r[0], 1.0):
        raise ValueError("profile must start on the unit sphere")
    _check_decay(N, r, u, decay_margin)
    area = unit_sphere_area(N)

    du = np.diff(u) / np.diff(r)
    lhs = area * np.sum(du ** 2 * (r[1:] ** N - r[:-1] ** N) / N)

    rho = 1.0 / r[::-1]
    v = rho ** (2 - N) * u[::-1]
    dv = np.diff(v) / np.diff(rho)
    grad = area * np.sum(dv ** 2 * (rho[1:] ** N - rho[:-1] ** N) / N)
    bnd = (N - 2) * area * v[-1] ** 2
    trunc = -(N - 2) * area * rho[0] ** (N - 2) * v[0] ** 2
    rhs = grad + bnd + trunc
    scale = max(abs(lhs), abs(rhs), np.finfo(float).tiny)
    return KelvinCheck(lhs, rhs, grad, bnd, trunc, abs(lhs - rhs) / scale)


def _check_decay(N, r, u, margin):
    tail = r >= r[-1] / 10
    au = np.abs(u[tail])
    if np.all(au == 0) or au[-1] == 0:
        return
    if np.any(au == 0) or np.count_nonzero(tail) < 3:
        return
    slope = np.polyfit(np.log(r[tail]), np.log(au), 1)[0]
    if slope > -(N - 2) / 2 - margin:
        raise ValueError(
            f"profile decays like r^{slope:.3g}; finite energy needs faster "
            f"than r^{-(N - 2) / 2:.3g}")
