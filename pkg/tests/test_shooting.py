import numpy as np
import pytest

from hardylab.potentials import ZERO_TAIL, PowerLaw
from hardylab.rayleigh import epsilon0, epsilon0_lower_bound
from hardylab.shooting import BracketNotFound, epsilon0_by_bisection, shoot

TAIL4 = PowerLaw(1.0, -4)


def test_homogeneous_solution():
    res = shoot(0.0, TAIL4, 3, Rinf=1e4, robin_coefficient=0.5)
    r = np.array([1.0, 2.0, 10.0, 300.0])
    assert np.allclose(res.value(r), 0.5 + 0.5 / r, rtol=1e-10)
    assert res.limit_estimate == pytest.approx(0.5, rel=1e-9)
    assert not res.supercritical


def test_weak_coupling_profile():
    res = shoot(0.1, TAIL4, 3)
    assert res.positive and res.monotone_decreasing
    assert res.limit_estimate > 0
    assert res.psi[0] == 1.0
    assert np.all(np.diff(res.flux_values) <= 1e-12)


def test_above_threshold_is_supercritical():
    res = shoot(2.0, TAIL4, 3)
    assert res.supercritical
    assert res.crossing is not None or res.limit_estimate <= 0


def test_limit_nonincreasing_in_eps():
    eps0 = epsilon0_by_bisection(TAIL4, 3)
    eps = np.linspace(0.0, 0.99 * eps0, 8)
    limits = [shoot(e, TAIL4, 3).limit_estimate for e in eps]
    assert np.all(np.diff(limits) < 0)


@pytest.mark.parametrize("power", [-4, -3])
def test_bisection_agrees_with_eigenproblem(power):
    tail = PowerLaw(1.0, power)
    shot = epsilon0_by_bisection(tail, 3)
    eig = epsilon0(3, tail).best
    assert shot == pytest.approx(eig, rel=1e-2)
    assert shot >= epsilon0_lower_bound(3, 1.0) * (1 - 1e-8)


def test_bisection_k_variant():
    shot = epsilon0_by_bisection(TAIL4, 4, robin_coefficient=1.5)
    eig = epsilon0(4, TAIL4, "log", k=1).best
    assert shot == pytest.approx(eig, rel=1e-2)


def test_bisection_stable_under_truncation_doubling():
    a = epsilon0_by_bisection(TAIL4, 3, Rinf=1e6)
    b = epsilon0_by_bisection(TAIL4, 3, Rinf=2e6)
    assert a == pytest.approx(b, rel=1e-8)


def test_zero_tail_has_no_threshold():
    with pytest.raises(BracketNotFound):
        epsilon0_by_bisection(ZERO_TAIL, 3, max_eps=1e3)


def test_below_threshold_profiles_positive_and_decreasing():
    eps0 = epsilon0_by_bisection(TAIL4, 3)
    for frac in (0.2, 0.6, 0.95):
        res = shoot(frac * eps0, TAIL4, 3)
        assert res.positive and res.monotone_decreasing and res.limit_estimate > 0


def test_profile_tail_beyond_truncation():
    res = shoot(0.5, TAIL4, 3, Rinf=1e4)
    r = np.array([1e4, 1e6])
    v = res.value(r)
    assert v[1] < v[0]
    assert v[1] == pytest.approx(res.limit_estimate, rel=1e-3)
    with pytest.raises(ValueError):
        res.value(0.5)


def test_input_validation():
    with pytest.raises(ValueError):
        shoot(-1.0, TAIL4, 3)
    with pytest.raises(ValueError):
        shoot(1.0, TAIL4, 3, Rinf=1.5)
