"""Radial potentials used throughout the package.

Every potential exposes ``scaled(r) = r**2 * V(r)``, which stays bounded for
the inverse-square family and is what the log-radial discretization consumes.
Calling a potential returns ``V(r)`` itself.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .funcs import exponent_from_lambda, xk_products


@dataclass(frozen=True)
class PowerLaw:
    """``K * r**power``; used for the subcritical tails ``f`` and cores ``g``."""

    K: float
    power: float

    def __call__(self, r):
        return self.K * np.asarray(r, dtype=float) ** self.power

    def scaled(self, r):
        return self.K * np.asarray(r, dtype=float) ** (self.power + 2)

    @property
    def sigma(self) -> float:
        # tail: f <= K r^(-2-sigma) for r >= 1; core: g <= K r^(-2+sigma) for r <= 1
        return abs(self.power + 2)


@dataclass(frozen=True)
class Profile:
    """Arbitrary nonnegative radial function with its declared bound (sigma, K)."""

    func: Callable
    sigma: float
    K: float

    def __call__(self, r):
        return self.func(np.asarray(r, dtype=float))

    def scaled(self, r):
        r = np.asarray(r, dtype=float)
        return r * r * self.func(r)


ZERO_TAIL = Profile(lambda r: np.zeros_like(r), sigma=1.0, K=0.0)


def check_tail(tail, r_max: float = 1e6, n: int = 400) -> bool:
    """Check ``0 <= f(r) <= K r^(-2-sigma)`` on a log grid of ``[1, r_max]``."""
    r = np.geomspace(1.0, r_max, n)
    vals = tail(r)
    return bool(np.all(vals >= 0) and np.all(vals <= tail.K * r ** (-2 - tail.sigma) * (1 + 1e-12)))


def check_core(core, r_min: float = 1e-6, n: int = 400) -> bool:
    """Check ``0 <= g(r) <= K r^(-2+sigma)`` on a log grid of ``[r_min, 1]``."""
    r = np.geomspace(r_min, 1.0, n)
    vals = core(r)
    return bool(np.all(vals >= 0) and np.all(vals <= core.K * r ** (-2 + core.sigma) * (1 + 1e-12)))


class RadialPotential:
    """Base class: subclasses implement ``scaled``."""

    N: int

    @property
    def half(self):
        return (self.N - 2) / 2

    def scaled(self, r):
        raise NotImplementedError

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.scaled(r) / (r * r)

    def theta(self, r) -> float:
        """Grid estimate of ``ess sup |x|^2 V``."""
        return float(np.max(self.scaled(np.asarray(r, dtype=float))))


@dataclass(frozen=True)
class InverseSquare(RadialPotential):
    """``lam / |x|^2``."""

    N: int
    lam: float

    def scaled(self, r):
        return np.full_like(np.asarray(r, dtype=float), self.lam)

    @property
    def alpha(self) -> float:
        return exponent_from_lambda(self.lam, self.N)


@dataclass(frozen=True)
class CriticalInner(RadialPotential):
    """Hardy-critical inside the unit ball, ``eps * f`` outside."""

    N: int
    eps: float
    tail: object

    def scaled(self, r):
        r = np.asarray(r, dtype=float)
        inner = r < 1
        out = np.empty_like(r)
        out[inner] = self.half ** 2
        out[~inner] = self.eps * self.tail.scaled(r[~inner])
        return out


@dataclass(frozen=True)
class CriticalOuter(RadialPotential):
    """``eps * g`` inside the unit ball, Hardy-critical outside."""

    N: int
    eps: float
    core: object

    def scaled(self, r):
        r = np.asarray(r, dtype=float)
        inner = r < 1
        out = np.empty_like(r)
        out[inner] = self.eps * self.core.scaled(r[inner])
        out[~inner] = self.half ** 2
        return out


def _log_series(k_full: int, last_coeff: float, t):
    """``1/4 sum_{i<k} (X_1..X_i)^2 + last_coeff (X_1..X_k)^2``."""
    xs = xk_products(k_full, t)
    total = np.zeros_like(t)
    prod = np.ones_like(t)
    for i, x in enumerate(xs, start=1):
        prod = prod * x * x
        total = total + (last_coeff if i == k_full else 0.25) * prod
    return total


@dataclass(frozen=True)
class IteratedLogInner(RadialPotential):
    """Hardy-critical plus ``1/4 |x|^-2 sum_{i<=k} X_1^2..X_i^2`` inside the unit
    ball (``X_i`` evaluated at ``|x|``), ``eps * f`` outside."""

    N: int
    k: int
    eps: float
    tail: object

    def scaled(self, r):
        r = np.asarray(r, dtype=float)
        inner = r < 1
        out = np.empty_like(r)
        out[inner] = self.half ** 2 + _log_series(self.k, 0.25, r[inner])
        out[~inner] = self.eps * self.tail.scaled(r[~inner])
        return out


@dataclass(frozen=True)
class IteratedLogBounded(RadialPotential):
    """Hardy-critical plus iterated-log corrections with last coefficient ``mu``,
    the ``X_i`` evaluated at ``|x|/D``."""

    N: int
    k: int
    mu: float
    D: float = 1.0

    def scaled(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r > self.D * (1 + 1e-12)):
            raise ValueError("iterated-log potential is defined for |x| <= D")
        t = np.minimum(r / self.D, 1.0)
        return self.half ** 2 + _log_series(self.k, self.mu, t)


@dataclass(frozen=True, eq=False)
class Tabulated(RadialPotential):
    """Potential given on nodes; ``r^2 V`` is interpolated linearly in ``log r``."""

    N: int
    r: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def scaled(self, r):
        r = np.asarray(r, dtype=float)
        nodes = np.asarray(self.r, dtype=float)
        sv = nodes ** 2 * np.asarray(self.values, dtype=float)
        return np.interp(np.log(r), np.log(nodes), sv)
