"""Outward shooting for the exterior Robin problem and bisection on its limit.

The radial equation ``psi'' + (N-1)/r psi' + eps f(r) psi = 0`` on ``r > 1``
is integrated in ``s = log r`` as the first-order system::

    d psi / ds = F r^(2-N),    dF / ds = -eps r^N f(r) psi,

where ``F = r^(N-1) psi'`` is the flux.  The flux is nonincreasing while
``psi > 0``, and at infinity ``psi`` behaves like ``l + c r^(2-N)``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

RTOL = 1e-10
ATOL = 1e-13


class BracketNotFound(RuntimeError):
    """No supercritical parameter was found on the truncated domain."""


@dataclass(frozen=True, eq=False)
class ShootingResult:
    """Outcome of one outward integration.

    ``limit_estimate`` is ``lim psi(r)``: the analytic ``r^(2-N)`` tail is
    removed at each truncation radius and the values at ``Rinf/2`` and
    ``Rinf`` are combined by Richardson extrapolation with the tail decay
    exponent ``sigma``.  ``crossing`` is the first zero of ``psi`` if any.
    """

    eps: float
    N: int
    Rinf: float
    r: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    flux_values: np.ndarray = field(repr=False)
    limit_estimate: float
    positive: bool
    monotone_decreasing: bool
    crossing: float | None
    _sol: object = field(repr=False, default=None)

    @property
    def supercritical(self) -> bool:
        return self.crossing is not None or self.limit_estimate <= 0

    def _state(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 1 - 1e-12):
            raise ValueError("the profile lives on r >= 1")
        top = self.r[-1]
        inside = r <= top
        psi = np.empty_like(r)
        flux = np.empty_like(r)
        if np.any(inside):
            y = self._sol(np.log(np.maximum(r[inside], 1.0)))
            psi[inside], flux[inside] = y[0], y[1]
        if np.any(~inside):
            # beyond the truncation radius the flux is frozen and psi follows l + c r^(2-N)
            F = self.flux_values[-1]
            c = -F / (self.N - 2)
            l0 = self.psi[-1] - c * top ** (2 - self.N)
            psi[~inside] = l0 + c * r[~inside] ** (2 - self.N)
            flux[~inside] = F
        return psi, flux

    def value(self, r):
        return self._state(r)[0]

    def flux(self, r):
        return self._state(r)[1]


def _tail_limit(N, r, psi, F):
    return psi + F * r ** (2 - N) / (N - 2)


def shoot(eps: float, tail, N: int, Rinf: float = 1e6, robin_coefficient: float | None = None,
          sigma: float | None = None, samples: int = 2001) -> ShootingResult:
    """Integrate from the unit sphere with ``psi(1) = 1`` and ``psi'(1) = -robin``.

    ``robin_coefficient`` defaults to ``(N-2)/2``.  ``tail`` provides
    ``scaled(r) = r^2 f(r)``; ``sigma`` defaults to ``tail.sigma``.

    Raises
    ------
    RuntimeError
        If the integrator fails (step-size collapse or overflow).
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if Rinf <= 2:
        raise ValueError("Rinf must exceed 2")
    robin = (N - 2) / 2 if robin_coefficient is None else robin_coefficient
    sig = getattr(tail, "sigma", 1.0) if sigma is None else sigma

    def rhs(s, y):
        r = np.exp(s)
        return [y[1] * r ** (2 - N), -eps * r ** (N - 2) * float(tail.scaled(np.array([r]))[0]) * y[0]]

    def hits_zero(s, y):
        return y[0]

    hits_zero.terminal = True
    hits_zero.direction = -1

    S = np.log(Rinf)
    sol = solve_ivp(rhs, (0.0, S), [1.0, -robin], method="DOP853", rtol=RTOL, atol=ATOL,
                    events=hits_zero, dense_output=True)
    if sol.status == -1:
        raise RuntimeError(f"integration failed: {sol.message}")
    crossing = None
    if sol.t_events[0].size:
        crossing = float(np.exp(sol.t_events[0][0]))
    s_end = sol.t[-1]
    s_grid = np.linspace(0.0, s_end, samples)
    y = sol.sol(s_grid)
    r = np.exp(s_grid)
    psi, F = y[0], y[1]
    if not np.all(np.isfinite(psi)):
        raise RuntimeError("integration overflowed")
    if crossing is None:
        l_full = _tail_limit(N, r[-1], psi[-1], F[-1])
        y_half = sol.sol(S - np.log(2.0))
        l_half = _tail_limit(N, Rinf / 2, y_half[0], y_half[1])
        q = 2.0 ** sig
        limit = (q * l_full - l_half) / (q - 1)
    else:
        limit = float(psi[-1])
    positive = crossing is None and bool(np.all(psi > 0))
    monotone = bool(np.all(np.diff(psi) <= 1e-12 * np.abs(psi[:-1])))
    return ShootingResult(eps, N, float(r[-1]), r, psi, F, float(limit), positive, monotone,
                          crossing, sol.sol)


def epsilon0_by_bisection(tail, N: int, robin_coefficient: float | None = None,
                          tol: float = 1e-8, Rinf: float = 1e6, start: float = 1.0,
                          max_eps: float = 1e8) -> float:
    """Smallest ``eps`` at which the shooting profile stops having a positive limit.

    The bracket ``[0, start]`` is doubled until its top is supercritical and
    then bisected until its relative width is below ``tol``.

    Raises
    ------
    BracketNotFound
        When no supercritical ``eps <= max_eps`` exists on ``[1, Rinf]``
        (tail too weak or truncation radius too small).
    """
    def supercritical(eps):
        return shoot(eps, tail, N, Rinf, robin_coefficient).supercritical

    if supercritical(0.0):
        raise BracketNotFound("the profile is already supercritical at eps = 0")
    lo, hi = 0.0, start
    while not supercritical(hi):
        lo, hi = hi, 2 * hi
        if hi > max_eps:
            raise BracketNotFound(
                f"no supercritical eps below {max_eps:g} with Rinf = {Rinf:g}")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if supercritical(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
