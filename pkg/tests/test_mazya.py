import math

import numpy as np
import pytest

from hardylab.cli import talenti_constant
from hardylab.funcs import eval_xk_tilde
from hardylab.grids import RadialDomain, make_grid
from hardylab.ground import build_ground_state
from hardylab.heat import random_profiles
from hardylab.identities import random_log_bumps
from hardylab.mazya import (InequalityViolation, MazyaCheck, SobolevQuotient, best_constant,
                            form_on_samples, harmonic_improvement_check, mazya_sup)
from hardylab.potentials import CriticalInner, InverseSquare, IteratedLogBounded, PowerLaw
from hardylab.shooting import shoot


def power(r):
    return r ** 2


def test_power_weights_closed_form():
    res = mazya_sup(MazyaCheck(power, power, 6.0))
    assert res.finite
    assert res.sup_value == pytest.approx(1 / 3, abs=1e-3)
    # power weights make the product constant in r
    assert res.trace[0] == pytest.approx(res.trace[-1], rel=1e-3)
    assert len(res.trace) == 3


@pytest.mark.parametrize("N", [4, 5])
def test_power_weights_other_dimensions(N):
    q = 2 * N / (N - 2)
    res = mazya_sup(MazyaCheck(lambda r: r ** (N - 1), lambda r: r ** (N - 1), q))
    assert res.sup_value == pytest.approx((N - 2) ** (-N / (N - 2)) / N, rel=1e-3)


def test_quadratic_exponent_diverges():
    res = mazya_sup(MazyaCheck(power, power, 2.0))
    assert not res.finite
    assert res.trace[-1] > res.trace[0]


def test_ground_state_weights_finite():
    tail = PowerLaw(1.0, -4)
    sh = shoot(0.6, tail, 3, Rinf=1e6)
    psi = build_ground_state(CriticalInner(3, 0.6, tail), outer_tail=sh)

    def A(r):
        return psi.value(r) ** 2 * r ** 2

    def B(r):
        return psi.value(r) ** 6 * eval_xk_tilde(1, r) ** 4 * r ** 2

    res = mazya_sup(MazyaCheck(A, B, 6.0))
    assert res.finite and math.isfinite(res.sup_value)


def test_weight_scaling():
    base = mazya_sup(MazyaCheck(power, power, 6.0)).sup_value
    twice_a = mazya_sup(MazyaCheck(lambda r: 2 * power(r), power, 6.0)).sup_value
    twice_b = mazya_sup(MazyaCheck(power, lambda r: 2 * power(r), 6.0)).sup_value
    assert twice_a == pytest.approx(base * 2 ** -3, rel=1e-10)
    assert twice_b == pytest.approx(2 * base, rel=1e-10)


def test_mazya_validation():
    with pytest.raises(ValueError):
        MazyaCheck(power, power, 1.5)
    with pytest.raises(ValueError):
        MazyaCheck(power, power, 6.0, r_min=2.0, r_max=1.0)
    with pytest.raises(ValueError):
        mazya_sup(MazyaCheck(lambda r: -power(r), power, 6.0))


def test_talenti_constant_value():
    assert talenti_constant(3) == pytest.approx(5.4779, abs=1e-4)
    assert talenti_constant(3) == pytest.approx(3 * (math.pi / 2) ** (4 / 3), rel=1e-14)


def test_best_constant_approaches_sharp_value():
    res = best_constant(SobolevQuotient(3, RadialDomain.whole(1e-4, 1e4)), n=201,
                        refinements=1, restarts=6)
    exact = talenti_constant(3)
    assert res.trace[1] <= res.trace[0]
    assert res.c_estimate == pytest.approx(exact, rel=0.05)
    assert res.c_estimate >= exact * (1 - 1e-3)
    assert res.profile.shape == res.r.shape


def test_supercritical_numerator_is_flagged():
    quot = SobolevQuotient(3, RadialDomain.whole(1e-4, 1e4), potential=InverseSquare(3, 2.0))
    with pytest.raises(InequalityViolation):
        best_constant(quot, n=201, refinements=0, restarts=3)


def test_improved_hardy_form_nonnegative():
    rng = np.random.default_rng(11)
    grid = make_grid(RadialDomain.ball(1.0), 1601, 1e-8)
    profiles = random_profiles(rng, 20, 1.0) + random_log_bumps(rng, 20)
    forms = form_on_samples(3, grid, IteratedLogBounded(3, 2, 0.25), profiles)
    assert np.all(forms >= 0)
    # the plain critical form is also nonnegative, and smaller
    plain = form_on_samples(3, grid, InverseSquare(3, 0.25), profiles)
    assert np.all(forms <= plain + 1e-12 * np.abs(plain))


def test_harmonic_single_sector_equality():
    rng = np.random.default_rng(5)
    grid = make_grid(RadialDomain.ball(1.0), 801, 1e-6)
    pot = InverseSquare(3, 0.25)
    hc = harmonic_improvement_check(3, random_profiles(rng, 1, 1.0), pot, grid)
    assert hc.lhs == pytest.approx(hc.rhs, rel=1e-10)
    assert hc.theta == pytest.approx(0.25)
    assert hc.holds


@pytest.mark.parametrize("N", [3, 4])
def test_harmonic_identity_and_improvement(N):
    rng = np.random.default_rng(N)
    grid = make_grid(RadialDomain.ball(1.0), 1601, 1e-8)
    pot = IteratedLogBounded(N, 1, 0.2)
    for _ in range(10):
        hc = harmonic_improvement_check(N, random_profiles(rng, 3, 1.0), pot, grid)
        assert hc.identity_gap <= 1e-8
        assert hc.lhs >= hc.rhs
        assert hc.holds


def test_harmonic_free_case_identity():
    rng = np.random.default_rng(2)
    grid = make_grid(RadialDomain.ball(1.0), 801, 1e-6)
    hc = harmonic_improvement_check(4, random_profiles(rng, 4, 1.0), None, grid)
    assert hc.theta == 0.0
    assert hc.identity_gap <= 1e-8
    # theta = 0 makes the nonradial factor 1, so the bound is the sector sum itself
    assert hc.rhs == pytest.approx(hc.sector_sum, rel=1e-10)
