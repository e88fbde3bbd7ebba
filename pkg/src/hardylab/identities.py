"""Sampled checks of the exact identities and positivity statements.

Each check evaluates both sides on random smooth test functions (or random
grid vectors) and returns the raw numbers so that callers can tabulate them.
"""

from dataclasses import dataclass, field

import numpy as np

from .funcs import eval_xk, eval_xk_derivative, eval_yk
from .grids import RadialGrid, assemble
from .ground import GroundState, InnerLaw
from .potentials import InverseSquare


@dataclass(frozen=True, eq=False)
class SampledCheck:
    """Both sides of a sampled identity or inequality.

    ``gaps`` holds relative gaps for identities and ``lhs - rhs`` for
    inequalities.
    """

    lhs: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    gaps: np.ndarray = field(repr=False)

    @property
    def worst(self) -> float:
        return float(np.max(np.abs(self.gaps)))


def _relative(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)


def random_log_bumps(rng, count: int, R: float = 1.0, depth: float = 1e-4):
    """Random profiles concentrated on a decade band of ``(0, R)``.

    ``u = (1 - (r/R)^2)^3 exp(-(log(r/R) - c)^2 / (2 w^2))`` with the centre
    ``c`` uniform in ``[log depth, -0.5]`` and width ``w`` in ``[0.3, 3]``;
    wide bumps approach the Hardy-extremal regime.  Returns ``(u, du)`` pairs.
    """
    out = []
    for _ in range(count):
        c = rng.uniform(np.log(depth), -0.5)
        w = rng.uniform(0.3, 3.0)

        def u(r, c=c, w=w):
            x = np.asarray(r, dtype=float) / R
            cut = np.where(x < 1, (1 - x * x) ** 3, 0.0)
            return cut * np.exp(-0.5 * ((np.log(x) - c) / w) ** 2)

        def du(r, c=c, w=w):
            x = np.asarray(r, dtype=float) / R
            cut = np.where(x < 1, (1 - x * x) ** 3, 0.0)
            dcut = np.where(x < 1, -6 * x * (1 - x * x) ** 2, 0.0)
            g = np.exp(-0.5 * ((np.log(x) - c) / w) ** 2)
            dg = -g * (np.log(x) - c) / (w * w * x)
            return (dcut * g + cut * dg) / R

        out.append((u, du))
    return out


def derivative_rule_check(k: int, a: float, r, variant: str = "x") -> SampledCheck:
    """Analytic ``d/dr X_k^a`` (or ``Y_k^a``) against a five-point difference.

    The step is ``1e-3 r`` (kept inside the validity range), so the
    difference error is ``O(1e-12)`` relative.
    """
    r = np.asarray(r, dtype=float)
    if variant == "x":
        def f(x):
            return eval_xk(k, x) ** a
        h = 1e-3 * np.minimum(r, 1.0 - r) / 2.5
    elif variant == "y":
        def f(x):
            return eval_yk(k, x) ** a
        h = 1e-3 * (r - 1.0) / 2.5
    else:
        raise ValueError(f"unknown variant {variant!r}")
    fd = (f(r - 2 * h) - 8 * f(r - h) + 8 * f(r + h) - f(r + 2 * h)) / (12 * h)
    exact = eval_xk_derivative(k, a, r, variant=variant)
    return SampledCheck(exact, fd, _relative(exact, fd))


def gauge_identity_check(N: int, alpha: float, grid: RadialGrid, vectors) -> SampledCheck:
    """Discrete form of ``int |grad u|^2 - lam u^2/|x|^2 = int |grad w|^2 |x|^(-2 alpha)``.

    ``lam = alpha (N - 2 - alpha)`` and ``u = r^(-alpha) w``.  The left side
    is assembled in the gauge ``r^(-alpha)`` with the potential integrated by
    the element Gauss rule, the right side as the weighted Dirichlet form of
    ``w``.  ``vectors`` are nodal values of ``w`` vanishing at both ends.
    """
    lam = alpha * (N - 2 - alpha)
    direct = assemble(N, grid, potential=InverseSquare(N, lam), gauge=alpha, lumped=False)
    weighted = assemble(N, grid, weight=GroundState(N, InnerLaw(-alpha)))
    lhs, rhs = [], []
    for w in vectors:
        w = np.asarray(w, dtype=float)
        if w[0] != 0 or w[-1] != 0:
            raise ValueError("test vectors must vanish at both ends")
        lhs.append(direct.energy(w[direct.free]))
        rhs.append(weighted.energy(w[weighted.free]))
    lhs, rhs = np.array(lhs), np.array(rhs)
    return SampledCheck(lhs, rhs, _relative(lhs, rhs))


def random_vectors(rng, count: int, n: int):
    """Random smooth nodal vectors vanishing at both ends of an ``n``-node grid."""
    x = np.linspace(0.0, 1.0, n)
    out = []
    for _ in range(count):
        c = rng.normal(size=6)
        out.append(np.sin(np.pi * x) * np.polynomial.polynomial.polyval(x, c)
                   + 0.05 * np.sin(np.pi * x) * rng.normal(size=n))
    for v in out:
        v[0] = v[-1] = 0.0
    return out
