import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardylab.grids import (PositivityError, RadialDomain, assemble, eigenpairs, make_grid,
                            quadrature)
from hardylab.ground import GroundState, InnerLaw
from hardylab.identities import gauge_identity_check, random_vectors
from hardylab.potentials import InverseSquare, Profile


def test_ball_grid_is_geometric():
    g = make_grid(RadialDomain.ball(1.0), 64, 1e-6)
    assert g.n == 64
    assert g.r[0] == pytest.approx(1e-6) and g.r[-1] == pytest.approx(1.0)
    ratio = g.r[1:] / g.r[:-1]
    assert np.allclose(ratio, ratio[0], rtol=1e-12)


def test_exterior_grid_endpoints():
    g = make_grid(RadialDomain.exterior(1.0, 1e3), 64)
    assert g.r[0] == pytest.approx(1.0) and g.r[-1] == pytest.approx(1e3)


@pytest.mark.parametrize("dom", [RadialDomain.ball(2.0), RadialDomain.exterior(1.0, 1e4),
                                 RadialDomain.whole(1e-4, 1e3)])
def test_refinement_nests(dom):
    g = make_grid(dom, 65)
    fine = g.refine()
    assert fine.n == 2 * g.n - 1
    assert np.allclose(fine.s[::2], g.s, rtol=0, atol=1e-14)
    if dom.kind != "whole":
        again = make_grid(dom, 2 * g.n - 1)
        assert np.allclose(again.s[::2], g.s, rtol=0, atol=1e-12)


def test_whole_space_grid_contains_unit_radius():
    g = make_grid(RadialDomain.whole(1e-3, 50.0), 101)
    assert np.min(np.abs(g.s)) < 1e-14


def test_grid_validation():
    with pytest.raises(ValueError):
        make_grid(RadialDomain.ball(1.0), 10)
    with pytest.raises(ValueError):
        make_grid(RadialDomain.ball(1.0), 64, 0.5)
    with pytest.raises(ValueError):
        make_grid(RadialDomain.ball(1.0), 64, 0.0)
    with pytest.raises(ValueError):
        RadialDomain.annulus(2.0, 1.0)
    with pytest.raises(ValueError):
        RadialDomain.whole(2.0, 10.0)


def test_quadrature_ball_volume():
    g = make_grid(RadialDomain.ball(1.0), 801, 1e-6)
    assert quadrature(g, np.ones(g.n), "volume", 3) == pytest.approx(4 * math.pi / 3, rel=1e-3)
    # u = r, squared norm
    assert quadrature(g, g.r ** 2, "volume", 3) == pytest.approx(4 * math.pi / 5, rel=1e-3)


def test_quadrature_hardy_measure_truncated():
    g = make_grid(RadialDomain.ball(1.0), 401, 1e-6)
    u = g.r ** -0.5
    exact = 4 * math.pi * math.log(1e6)
    assert quadrature(g, u * u, "hardy", 3) == pytest.approx(exact, rel=1e-12)


def test_quadrature_weighted_measure():
    g = make_grid(RadialDomain.ball(1.0), 801, 1e-8)
    phi = GroundState(3, InnerLaw(-0.25))
    # int phi^2 dx = 4 pi int r^(3/2) dr
    assert quadrature(g, np.ones(g.n), "weighted", 3, phi) == pytest.approx(4 * math.pi / 2.5, rel=1e-3)


def test_quadrature_second_order():
    exact = 4 * math.pi * (2 * math.cos(1) - math.sin(1))  # 4 pi int_0^1 r^2 cos r dr
    errs = []
    for n in (101, 201, 401):
        g = make_grid(RadialDomain.ball(1.0), n, 1e-6)
        errs.append(abs(quadrature(g, np.cos(g.r), "volume", 3) - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_dirichlet_ball_eigenvalue_is_pi_squared():
    g = make_grid(RadialDomain.ball(1.0), 2001, 1e-6)
    op = assemble(3, g, outer="dirichlet")
    pairs = eigenpairs(op, 3)
    assert pairs.values[0] == pytest.approx(math.pi ** 2, rel=1e-2)
    assert np.allclose(pairs.values, [(n * math.pi) ** 2 for n in (1, 2, 3)], rtol=1e-2)
    assert np.all(pairs.residuals <= 1e-8)


@pytest.mark.parametrize("N,alpha", [(3, 0.3), (4, 1.5), (5, 0.7)])
def test_boundary_term_constant_function(N, alpha):
    g = make_grid(RadialDomain.ball(1.0), 401, 1e-6)
    op = assemble(N, g, boundary_coefficient=alpha, denominator=InverseSquare(N, 1.0))
    x = np.exp(-op.log_gauge)[op.free]  # u = 1
    # gradient of the interpolated constant is O(h^2); the boundary term is exact
    assert op.energy(x) == pytest.approx(alpha, rel=1e-3)
    assert op.quotient(x) == pytest.approx(alpha * (N - 2), rel=1e-3)


def test_exterior_boundary_sign():
    g = make_grid(RadialDomain.exterior(1.0, 100.0), 401)
    op = assemble(3, g, boundary_coefficient=0.5)
    x = np.zeros(op.free.sum())
    x[0] = 1.0
    plain = assemble(3, g)
    assert op.energy(x) == pytest.approx(plain.energy(x) - 0.5)


@pytest.mark.parametrize("N", [3, 4])
def test_weighted_stiffness_matches_hardy_form(N):
    g = make_grid(RadialDomain.ball(1.0), 401, 1e-6)
    rng = np.random.default_rng(3)
    chk = gauge_identity_check(N, (N - 2) / 2, g, random_vectors(rng, 20, g.n))
    assert chk.worst <= 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 6), st.floats(-1.0, 1.0), st.integers(0, 2 ** 31 - 1))
def test_gauge_identity_property(N, frac, seed):
    alpha = frac * (N - 2) / 2
    g = make_grid(RadialDomain.ball(1.0), 201, 1e-4)
    chk = gauge_identity_check(N, alpha, g, random_vectors(np.random.default_rng(seed), 3, g.n))
    assert chk.worst <= 1e-8


def _reference_energy(N, grid, x, a, lam, order=20):
    """Independent Gauss integration of int (u_r^2 - lam u^2/r^2) r^(N-1) dr for the
    piecewise-linear computational variable x with u = r^-a x."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for i in range(grid.n - 1):
        s0, s1 = grid.s[i], grid.s[i + 1]
        h = s1 - s0
        s = s0 + 0.5 * h * (xg + 1)
        w = 0.5 * h * wg
        xs = x[i] + (x[i + 1] - x[i]) * (s - s0) / h
        dxs = (x[i + 1] - x[i]) / h
        # u_s = e^(-a s)(x_s - a x); (u_r)^2 r^(N-1) dr = u_s^2 e^((N-2) s) ds
        us = np.exp(-a * s) * (dxs - a * xs)
        u = np.exp(-a * s) * xs
        total += np.sum(w * (us * us - lam * u * u) * np.exp((N - 2) * s))
    return total


@pytest.mark.parametrize("N,lam", [(3, 0.0), (3, 0.2), (4, -0.5)])
def test_assembled_form_equals_direct_quadrature(N, lam):
    g = make_grid(RadialDomain.ball(1.0), 120, 1e-3)
    a = (N - 2) / 2
    op = assemble(N, g, potential=InverseSquare(N, lam), lumped=False)
    rng = np.random.default_rng(7)
    for _ in range(5):
        x = rng.normal(size=g.n)
        ref = _reference_energy(N, g, x, a, lam)
        assert op.energy(x) == pytest.approx(ref, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 6), st.integers(0, 2 ** 31 - 1))
def test_stiffness_symmetric_positive(N, seed):
    g = make_grid(RadialDomain.ball(1.0), 64, 1e-4)
    op = assemble(N, g)
    A = op.sparse().toarray()
    assert np.allclose(A, A.T)
    x = np.random.default_rng(seed).normal(size=op.free.sum())
    assert op.energy(x) >= -1e-12 * np.sum(np.abs(A)) * np.sum(x * x)
    assert np.all(op.mass > 0)


def test_positivity_errors():
    g = make_grid(RadialDomain.ball(1.0), 64, 1e-4)
    neg = Profile(lambda r: -np.ones_like(r), sigma=1.0, K=1.0)
    with pytest.raises(PositivityError):
        assemble(3, g, denominator=neg)

    class Vanishing:
        def log_value(self, r):
            return np.where(np.asarray(r) > 0.5, -np.inf, 0.0)

    with pytest.raises(PositivityError):
        assemble(3, g, weight=Vanishing())


def test_zero_mass_nodes_use_reciprocal_pencil():
    g = make_grid(RadialDomain.ball(1.0), 801, 1e-6)
    support = Profile(lambda r: np.where(r > 0.5, 1.0, 0.0), sigma=1.0, K=1.0)
    op = assemble(3, g, denominator=support, outer="dirichlet")
    pairs = eigenpairs(op, 1)
    assert pairs.values[0] > 0
    assert pairs.residuals[0] <= 1e-8


def test_fast_solver_falls_back_on_poor_pairs():
    # a window holding a single eigenvalue once made MRRR return an unconverged pair
    from hardylab.heat import heat_grid
    g = heat_grid(RadialDomain.ball(1.0), 0.005)
    op = assemble(3, g, outer="dirichlet")
    pairs = eigenpairs(op, upper=27.6, fast=True)
    assert pairs.values.size == 1
    assert pairs.values[0] == pytest.approx(math.pi ** 2, rel=1e-4)
    assert pairs.residuals[0] <= 1e-10
