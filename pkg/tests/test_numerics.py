import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from zetamellin.errors import DomainError, PoleError
from zetamellin.numerics import (BumpSpec, bernoulli_even, chi, finite_or_raise, log_gamma, r1, residue_R,
                                 rs_theta, smooth_bump)


@given(st.floats(0.05, 60.0), st.floats(-200.0, 200.0))
def test_log_gamma_matches_scipy_loggamma_right_half_plane(x, y):
    z = complex(x, y)
    assert abs(log_gamma(z) - special.loggamma(z)) < 1e-11 * max(1.0, abs(z))


def test_log_gamma_branch_is_continuous_along_vertical_line():
    t = np.linspace(0.0, 400.0, 40001)
    v = np.imag(log_gamma(0.25 + 0.5j * t))
    assert np.max(np.abs(np.diff(v))) < 0.1


def test_log_gamma_rejects_poles():
    with pytest.raises(PoleError):
        log_gamma(np.array([1.5, -3.0]))


def test_log_gamma_left_half_plane_exponentiates_to_gamma():
    z = np.array([-2.5 + 0.3j, -0.7 - 4j])
    assert np.allclose(np.exp(log_gamma(z)), special.gamma(z), rtol=1e-11)


@pytest.mark.parametrize("k, expected", [(1, 1 / 6), (2, -1 / 30), (3, 1 / 42), (6, -691 / 2730)])
def test_bernoulli_even(k, expected):
    assert bernoulli_even(k) == pytest.approx(expected, rel=1e-15)


@given(st.floats(1.0, 1000.0))
def test_rs_theta_matches_mpmath(t):
    assert rs_theta(t) == pytest.approx(float(mpmath.siegeltheta(t)), abs=1e-10 * max(1.0, t))


def test_rs_theta_is_odd():
    t = np.array([3.0, 77.5, 1234.0])
    assert np.allclose(rs_theta(-t), -rs_theta(t), atol=1e-12)


@pytest.mark.parametrize("s", [0.3 + 2j, 2.0 + 0.5j, 0.5 + 100j])
def test_chi_against_functional_equation(s):
    expected = complex(mpmath.zeta(s) / mpmath.zeta(1 - s))
    assert abs(chi(s) - expected) < 1e-10 * abs(expected)


def test_chi_has_unit_modulus_on_critical_line():
    t = np.linspace(1.0, 500.0, 50)
    assert np.allclose(np.abs(chi(0.5 + 1j * t)), 1.0, atol=1e-12)


def test_chi_poles():
    with pytest.raises(PoleError):
        chi(1.0)
    with pytest.raises(PoleError):
        chi(-2.0)


def test_bump_spec_validation():
    with pytest.raises(DomainError):
        BumpSpec(0.0, 2.0, 1.0, 3.0)
    with pytest.raises(DomainError):
        BumpSpec(0.0, 1.0, 2.0, 3.0, smoothness=0)


@given(st.floats(-1.0, 4.0))
def test_bump_values_in_unit_interval(x):
    b = smooth_bump(BumpSpec(0.0, 1.0, 2.0, 3.0))
    v = b(x)
    assert 0.0 <= v <= 1.0
    if 1.0 <= x <= 2.0:
        assert v == 1.0
    if x <= 0.0 or x >= 3.0:
        assert v == 0.0


def test_bump_derivative_matches_finite_difference():
    b = smooth_bump(BumpSpec(0.5, 1.0, 2.0, 2.5))
    x = np.array([0.6, 0.8, 0.95, 2.1, 2.3])
    h = 1e-6
    fd = (b(x + h) - b(x - h)) / (2 * h)
    assert np.allclose(b.derivative(x, 1), fd, atol=1e-6)
    fd2 = (b.derivative(x + h, 1) - b.derivative(x - h, 1)) / (2 * h)
    assert np.allclose(b.derivative(x, 2), fd2, atol=1e-4)


def test_bump_ramps_are_symmetric_partition():
    # rising ramp at u plus falling ramp at the mirrored point sum to one
    b = smooth_bump(BumpSpec(0.0, 1.0, 2.0, 3.0))
    u = np.linspace(0.0, 1.0, 21)
    assert np.allclose(b(u) + b(2.0 + u), 1.0, atol=1e-14)


def test_r1_against_mpmath():
    y = 12.5
    ref = (mpmath.sqrt(mpmath.pi / 2)
           * (mpmath.power(2, -1j * y) * mpmath.gamma(0.25 - 0.5j * y) / mpmath.gamma(0.25 + 0.5j * y)) ** 3
           * mpmath.gamma(2j * y) * mpmath.cosh(mpmath.pi * y))
    assert abs(r1(y) - complex(ref)) < 1e-10 * abs(complex(ref))


def test_r1_large_argument_size():
    y = np.array([50.0, 500.0, 5000.0])
    assert np.allclose(np.abs(r1(y)), math.pi / (2 * np.sqrt(2 * y)), rtol=1e-2)


def test_r1_floor():
    with pytest.raises(PoleError):
        r1(0.1)
    assert np.isfinite(r1(0.1, floor=0.05))


def test_residue_R():
    assert residue_R(10.0, 0.0) == 0j
    assert residue_R(10.0, 2.0) == pytest.approx(2.0 * r1(10.0))
    with pytest.raises(DomainError):
        residue_R(-1.0, 1.0)


def test_finite_or_raise():
    assert finite_or_raise(1.5, "x") == 1.5
    with pytest.raises(DomainError, match="thing"):
        finite_or_raise(np.array([1.0, np.nan]), "thing")


def test_log_gamma_special_values():
    assert abs(log_gamma(1.0)) < 1e-15
    assert log_gamma(0.5).real == pytest.approx(0.5 * math.log(math.pi), abs=1e-14)


def test_log_gamma_shift_recurrence_oracle():
    # log Gamma(z) = log Gamma(z + 8) - sum_{k<8} log(z + k), evaluated with mpmath at the shifted point
    z = 3 + 4j
    shifted = complex(mpmath.loggamma(z + 8)) - sum(np.log(z + k) for k in range(8))
    assert abs(log_gamma(z) - shifted) < 1e-12


@given(st.floats(0.1, 10.0), st.floats(-50.0, 50.0))
def test_log_gamma_recurrence_property(x, y):
    z = complex(x, y)
    lhs = np.exp(log_gamma(z + 1) - log_gamma(z))
    assert abs(lhs - z) < 1e-10 * abs(z)


def test_chi_special_values():
    assert abs(chi(0.5) - 1.0) < 1e-14
    assert abs(chi(2.0) - (-2 * math.pi ** 2)) < 1e-12


@given(st.floats(-3.0, 4.0), st.floats(1.0, 100.0))
def test_chi_involution(sigma, t):
    s = complex(sigma, t)
    assert abs(chi(s) * chi(1 - s) - 1.0) < 1e-10


def test_rs_theta_special_values():
    assert rs_theta(0.0) == 0.0
    assert rs_theta(17.5) + rs_theta(-17.5) == 0.0


def test_rs_theta_is_minus_half_branch_tracked_arg_chi():
    t = np.linspace(0.0, 100.0, 20001)
    arg = np.unwrap(np.angle(chi(0.5 + 1j * t)))
    assert rs_theta(100.0) == pytest.approx(-0.5 * arg[-1], abs=1e-9)


def test_bump_spec_examples():
    b = smooth_bump(BumpSpec(1.0, 2.0, 3.0, 4.0))
    assert b(2.5) == 1.0 and b(0.5) == 0.0
    x = np.linspace(1.0, 2.0, 1001)
    assert np.max(np.abs(b.derivative(x, 1))) <= 10.0
    assert np.all(np.diff(b(x)) >= 0)
    assert np.all(np.diff(b(np.linspace(3.0, 4.0, 1001))) <= 0)


@given(st.floats(0.5, 200.0))
def test_r1_and_residue_conjugation(y):
    assert abs(r1(-y) - np.conj(r1(y))) < 1e-12 * abs(r1(y))
    assert residue_R(y, 3.0) == pytest.approx(3.0 * residue_R(y, 1.0))


def test_r1_decay_bound():
    y = np.array([1.0, 10.0, 100.0])
    scaled = np.abs(r1(y)) * np.sqrt(1 + y)
    assert np.max(scaled) < 2.0


def test_r1_factorwise_oracle_at_14():
    y = 14.0
    lg = lambda z: complex(mpmath.loggamma(z))  # noqa: E731
    log_val = (0.5 * math.log(math.pi / 2) + 3 * (-1j * y * math.log(2) + lg(0.25 - 0.5j * y) - lg(0.25 + 0.5j * y))
               + lg(2j * y) + math.log(math.cosh(math.pi * y)))
    ref = np.exp(log_val)
    assert abs(r1(y) - ref) < 1e-10 * abs(ref)
