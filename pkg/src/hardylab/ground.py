"""Positive radial solutions of ``Delta phi + V phi = 0`` (ground states).

A ground state is a closed-form inner law ``r**exponent * prod X_i(r/D)**p_i``
optionally continued past ``match_radius`` by a numerically integrated outer
profile.  Values are handled in log form so that ``phi**2 r**(N-2)`` never
overflows on deep log grids.
"""

from dataclasses import dataclass

import numpy as np

from .funcs import beta_from_mu, exponent_from_lambda, xk_products
from .potentials import (CriticalInner, InverseSquare, IteratedLogBounded,
                         IteratedLogInner)


class MatchError(ValueError):
    """Inner law and outer profile disagree at the matching radius."""


@dataclass(frozen=True)
class InnerLaw:
    exponent: float
    log_powers: tuple = ()
    D: float = 1.0

    def log_value(self, r):
        r = np.asarray(r, dtype=float)
        out = self.exponent * np.log(r)
        if self.log_powers:
            t = np.minimum(r / self.D, 1.0)
            for p, x in zip(self.log_powers, xk_products(len(self.log_powers), t)):
                out = out + p * np.log(x)
        return out

    def log_derivative(self, r):
        r = np.asarray(r, dtype=float)
        out = self.exponent / r
        if self.log_powers:
            t = np.minimum(r / self.D, 1.0)
            prod = np.ones_like(r)
            for p, x in zip(self.log_powers, xk_products(len(self.log_powers), t)):
                prod = prod * x
                out = out + p / r * prod
        return out


@dataclass(frozen=True, eq=False)
class GroundState:
    """Radial ground state.

    ``outer`` is any object with ``value(r)`` and ``flux(r)`` (the latter
    ``r**(N-1) psi'(r)``), typically a :class:`hardylab.shooting.ShootingResult`.
    """

    N: int
    inner_law: InnerLaw
    match_radius: float | None = None
    outer: object = None

    def _split(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if self.match_radius is None:
            return r, np.zeros(r.shape, dtype=bool)
        return r, r > self.match_radius

    def log_value(self, r):
        r, out_mask = self._split(r)
        res = np.empty_like(r)
        res[~out_mask] = self.inner_law.log_value(r[~out_mask])
        if np.any(out_mask):
            res[out_mask] = np.log(self.outer.value(r[out_mask]))
        return res

    def value(self, r):
        return np.exp(self.log_value(r))

    def log_derivative(self, r):
        r, out_mask = self._split(r)
        res = np.empty_like(r)
        res[~out_mask] = self.inner_law.log_derivative(r[~out_mask])
        if np.any(out_mask):
            ro = r[out_mask]
            res[out_mask] = self.outer.flux(ro) / (ro ** (self.N - 1) * self.outer.value(ro))
        return res

    def derivative(self, r):
        return self.value(r) * self.log_derivative(r)


def build_ground_state(pot, outer_tail=None, tol: float = 1e-6) -> GroundState:
    """Ground state of a radial potential.

    Closed forms cover the inverse-square family and the bounded iterated-log
    potentials.  For potentials that are critical inside the unit ball and
    carry a tail outside, ``outer_tail`` must be the outward shooting solution
    normalized to ``psi(1) = 1``; value and log-derivative are matched at
    ``r = 1``.
    """
    N = pot.N
    half = (N - 2) / 2
    if isinstance(pot, InverseSquare):
        return GroundState(N, InnerLaw(-exponent_from_lambda(pot.lam, N)))
    if isinstance(pot, IteratedLogBounded):
        beta = beta_from_mu(pot.mu)
        powers = (-0.5,) * (pot.k - 1) + (-beta,)
        return GroundState(N, InnerLaw(-half, powers, pot.D))
    if isinstance(pot, (CriticalInner, IteratedLogInner)):
        if outer_tail is None:
            raise ValueError("an outer shooting profile is required for this potential")
        k = pot.k if isinstance(pot, IteratedLogInner) else 0
        law = InnerLaw(-half, (-0.5,) * k, 1.0)
        inner_val = 1.0
        inner_logd = -half - k / 2
        outer_val = float(outer_tail.value(np.array([1.0]))[0])
        outer_logd = float(outer_tail.flux(np.array([1.0]))[0]) / outer_val
        if abs(outer_val - inner_val) > tol or abs(outer_logd - inner_logd) > tol * max(1.0, abs(inner_logd)):
            raise MatchError(
                f"value/log-derivative mismatch at r=1: ({outer_val}, {outer_logd}) "
                f"vs ({inner_val}, {inner_logd})")
        return GroundState(N, law, match_radius=1.0, outer=outer_tail)
    raise ValueError(f"no ground-state construction for {type(pot).__name__}")
