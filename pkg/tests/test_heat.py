import math

import numpy as np
import pytest

from hardylab.grids import RadialDomain, make_grid
from hardylab.ground import build_ground_state
from hardylab.heat import (UnderResolved, check_bound, diagonal_kernel, envelope,
                           ground_transform_check, heat_grid, random_profiles, sector_diagonal,
                           semigroup_check)
from hardylab.potentials import InverseSquare, IteratedLogBounded

BALL = RadialDomain.ball(1.0)


@pytest.fixture(scope="module")
def ball_grid():
    return heat_grid(BALL, 0.005)


def test_radial_sector_eigenvalues(ball_grid):
    sk = sector_diagonal(3, ball_grid, 0, 0.01, [0.5])
    n = np.arange(1, 6)
    assert np.allclose(sk.eigenvalues[:5], (n * math.pi) ** 2, rtol=1e-3)
    assert sk.d_m == 1 and sk.c_m == 0


def test_first_sector_lies_above(ball_grid):
    s0 = sector_diagonal(3, ball_grid, 0, 0.01, [0.5])
    s1 = sector_diagonal(3, ball_grid, 1, 0.01, [0.5])
    # first zero of the spherical Bessel function j_1
    assert s1.eigenvalues[0] == pytest.approx(4.493409457909064 ** 2, rel=1e-4)
    assert s1.eigenvalues[0] > s0.eigenvalues[0]
    assert s1.d_m == 3


def test_large_time_asymptotics(ball_grid):
    r = np.array([0.25, 0.5, 0.75])
    t = 1.0
    sk = sector_diagonal(3, ball_grid, 0, t, r)
    # leading mode sqrt(2) sin(pi r) / r, normalized in L^2(r^2 dr)
    lead = 2 * np.sin(np.pi * sk.r) ** 2 / sk.r ** 2 * math.exp(-math.pi ** 2 * t)
    assert np.allclose(sk.values[0], lead, rtol=1e-3)


def test_kernel_positive_and_decreasing_in_time(ball_grid):
    t = np.geomspace(1e-3, 1.0, 6)
    K = diagonal_kernel(3, ball_grid, t, np.geomspace(1e-3, 0.9, 8))
    assert np.all(K.values > 0)
    assert np.all(np.diff(K.values, axis=0) < 0)
    assert not K.cutoff_insufficient


def test_free_kernel_matches_gaussian():
    grid = make_grid(RadialDomain.whole(1e-6, 4.0), 3043)
    K = diagonal_kernel(3, grid, 0.01, [0.5])
    exact = (4 * math.pi * 0.01) ** -1.5
    assert K.values[0, 0] == pytest.approx(exact, rel=0.02)
    assert K.tail_estimate <= 0.01


def test_kernel_increases_with_potential(ball_grid):
    t = np.array([1e-3, 1e-2])
    r = np.array([0.01, 0.1, 0.5])
    vals = []
    for lam in (-0.5, 0.0, 0.1875, 0.25):
        pot = InverseSquare(3, lam)
        K = diagonal_kernel(3, ball_grid, t, r, pot, build_ground_state(pot), sectors=6)
        vals.append(K.values)
    for lo, hi in zip(vals, vals[1:]):
        assert np.all(hi > lo)


def test_critical_bound_ratio_bounded(ball_grid):
    pot = InverseSquare(3, 0.25)
    K = diagonal_kernel(3, ball_grid, np.geomspace(1e-4, 0.1, 4), np.geomspace(1e-3, 0.9, 6),
                        pot, build_ground_state(pot))
    rep = check_bound(K, "critical-bounded")
    assert math.isfinite(rep.sup_ratio) and rep.sup_ratio > 0
    assert rep.inf_ratio <= rep.sup_ratio


def test_semigroup_property(ball_grid):
    sk = sector_diagonal(3, ball_grid, 1, 0.01, [0.5], t_min=0.005, keep_modes=True)
    chk = semigroup_check(sk, 0.01, [(0.3, 0.5), (0.5, 0.5), (0.2, 0.8)])
    assert chk.chapman_kolmogorov <= 1e-8
    assert chk.cauchy_schwarz == 0.0
    assert chk.monotone_in_t


def test_semigroup_needs_modes(ball_grid):
    sk = sector_diagonal(3, ball_grid, 0, 0.01, [0.5])
    with pytest.raises(ValueError):
        semigroup_check(sk, 0.01, [(0.3, 0.5)])


@pytest.mark.parametrize("pot", [InverseSquare(3, 0.25), InverseSquare(3, 0.1875),
                                 IteratedLogBounded(4, 1, 0.25)])
def test_ground_transform(pot):
    # the boundary term at the inner radius is O(r_min^(N-2)); keep it negligible
    grid = make_grid(BALL, 1601, 1e-14)
    rng = np.random.default_rng(4)
    res = ground_transform_check(pot.N, pot, build_ground_state(pot), grid,
                                 random_profiles(rng, 10, 1.0))
    assert res.max_relative_gap <= 1e-9
    assert np.all(res.transformed >= 0)


def test_under_resolved_grid():
    grid = make_grid(BALL, 64, 1e-2)
    with pytest.raises(UnderResolved):
        sector_diagonal(3, grid, 0, 1e-9, [0.5])


def test_envelope_unknown_kind():
    with pytest.raises(ValueError):
        envelope("nope", 3, [0.1], [0.5])


def test_negative_lambda_envelope_shape():
    env = envelope("subcritical-negative-lambda", 3, [1e-2], [0.01, 0.1, 1.0], alpha=-0.5)
    # phi = r^(-alpha) vanishes at the origin; the envelope saturates at r ~ sqrt(t)
    assert env[0, 0] == pytest.approx(0.1 ** 0.5)
    assert env[0, 2] == 1.0


def test_heat_grid_spacing():
    g = heat_grid(BALL, 0.01, 1e-6)
    assert np.allclose(np.diff(g.s), np.log(1e6) / (g.n - 1))
    assert g.h[0] == pytest.approx(0.01, rel=1e-3)
