import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from zetamellin.errors import DataError, DomainError
from zetamellin.moments import (A4, MomentEngine, MomentTable, P4Coefficients, dirichlet_sum, dyadic_sup, e2,
                                e2_mean_square, e2_running_integral, e2_running_profile, fit_p4, fourth_moment,
                                load_coefficients, loglog_slope, main_term, sign_changes, write_coefficients)
from zetamellin.zeta import z_hardy


def test_fourth_moment_against_adaptive_quadrature(engine):
    # independent route: adaptive quadrature straight on Z^4, split at unit intervals
    ref = sum(integrate.quad(lambda t: z_hardy(t) ** 4, a, a + 1.0, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
              for a in range(0, 100))
    value, err = fourth_moment(100.0, engine)
    assert value == pytest.approx(ref, rel=1e-10)
    assert err < 1e-6 * value


def test_fourth_moment_edges():
    assert fourth_moment(0.0) == (0.0, 0.0)
    with pytest.raises(DomainError):
        fourth_moment(-1.0)


def test_engine_round_trip(tmp_path):
    eng = MomentEngine(200.0)
    eng.save(tmp_path / "e.npz")
    back = MomentEngine.load(tmp_path / "e.npz")
    assert np.array_equal(back.z, eng.z)
    assert back.moment(150.0) == eng.moment(150.0)


def test_engine_is_a_prefix_of_larger_engines(engine):
    small = MomentEngine(300.0)
    assert np.array_equal(small.edges, engine.edges[: len(small.edges)])
    assert small.moment(250.0) == pytest.approx(engine.moment(250.0), rel=1e-14)


def test_engine_rejects_out_of_range(engine):
    with pytest.raises(DomainError):
        engine.moment(engine.edges[-1] + 1.0)


def test_coefficient_validation():
    with pytest.raises(DomainError):
        P4Coefficients((1.0, 2.0, 3.0, 4.0))
    with pytest.raises(DomainError):
        P4Coefficients((0.0,) * 5, ("fitted",) * 4 + ("guessed",))
    with pytest.raises(DomainError):
        P4Coefficients((0.0,) * 5, ("fitted",) * 4 + ("pinned",))
    c = P4Coefficients((1.0, 2.0, 3.0, 4.0, A4), ("fitted",) * 4 + ("pinned",))
    assert c.p4(0.0) == 1.0


def test_q4_is_p4_plus_derivative():
    c = P4Coefficients((0.3, -1.0, 2.0, 0.5, A4))
    x = np.linspace(0.0, 10.0, 7)
    deriv = np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyder(c.a))
    assert np.allclose(c.q4(x), c.p4(x) + deriv)


def test_coefficients_csv_round_trip(tmp_path):
    c = P4Coefficients((0.1, -0.2, 0.3, -0.4, A4), ("fitted",) * 4 + ("pinned",))
    write_coefficients(c, tmp_path / "c.csv")
    back = load_coefficients(tmp_path / "c.csv")
    assert back.a == c.a
    assert back.tags == ("loaded",) * 5


def test_coefficients_csv_errors(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("j,value\n0,1\n")
    with pytest.raises(DataError, match="header"):
        load_coefficients(p)
    p.write_text("j,a_j,tag\n0,1,loaded\n1,x,loaded\n")
    with pytest.raises(DataError, match=":3:"):
        load_coefficients(p)
    p.write_text("j,a_j,tag\n0,1,loaded\n")
    with pytest.raises(DataError, match="a0..a4"):
        load_coefficients(p)


@given(st.lists(st.floats(-5.0, 5.0), min_size=4, max_size=4))
def test_fit_p4_recovers_synthetic_polynomial(a):
    T = np.linspace(500.0, 5000.0, 400)
    coeffs = tuple(a) + (A4,)
    M = main_term(T, P4Coefficients(coeffs))
    fit = fit_p4(T, M)
    assert np.allclose(fit.a, coeffs, rtol=1e-6, atol=1e-6)
    assert fit.tags[4] == "pinned"
    assert fit.residual_rms < 1e-9


def test_fit_p4_unpinned_on_synthetic_data():
    T = np.linspace(500.0, 5000.0, 400)
    coeffs = (0.5, -0.25, 0.1, -0.02, 0.07)
    fit = fit_p4(T, main_term(T, P4Coefficients(coeffs)), pin_a4=False)
    assert np.allclose(fit.a, coeffs, rtol=1e-5, atol=1e-7)


def test_fit_p4_domain():
    with pytest.raises(DomainError, match="at least"):
        fit_p4(np.linspace(10, 20, 10), np.ones(10))
    with pytest.raises(DomainError):
        fit_p4(np.linspace(0.5, 20, 60), np.ones(60))


def test_main_term_zero_limit():
    c = P4Coefficients((1.0, 1.0, 1.0, 1.0, A4))
    assert main_term(0.0, c) == 0.0


def test_moment_table_identity(engine, coeffs):
    T = np.arange(100.0, 1000.0, 10.0)
    table = MomentTable.build(T, coeffs, engine)
    assert np.array_equal(table.E2, e2(T, coeffs, engine))
    table.E2 = table.E2 + 1e-9
    with pytest.raises(DataError):
        table.check()


def test_moment_table_grid_validation(engine, coeffs):
    with pytest.raises(DomainError):
        MomentTable.build([10.0, 5.0], coeffs, engine)


def test_e2_running_integrals_agree(engine, coeffs):
    T = np.array([200.0, 700.0, 1500.0])
    prof1 = e2_running_profile(T, coeffs, 1, engine)
    prof2 = e2_running_profile(T, coeffs, 2, engine)
    for i, t in enumerate(T):
        assert prof1[i] == pytest.approx(e2_running_integral(t, coeffs, engine), rel=1e-8, abs=1e-6)
        assert prof2[i] == pytest.approx(e2_mean_square(t, coeffs, engine), rel=1e-8)


def test_e2_domain(engine, coeffs):
    with pytest.raises(DomainError):
        e2(0.0, coeffs, engine)


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=60))
def test_sign_changes_matches_pairwise_count(values):
    nz = [v for v in values if v != 0]
    expected = sum(1 for a, b in zip(nz, nz[1:]) if (a > 0) != (b > 0))
    assert sign_changes(np.array(values)) == expected


def test_loglog_slope_exact_power():
    x = np.array([1.0, 10.0, 100.0])
    assert loglog_slope(x, 3 * x ** 1.5) == pytest.approx(1.5)


def test_dyadic_sup_blocks():
    T = np.arange(100.0, 801.0)
    his, sups = dyadic_sup(T, -T, 100.0, 800.0)
    assert list(his) == [200.0, 400.0, 800.0]
    assert list(sups) == [199.0, 399.0, 799.0]


def test_dirichlet_sum():
    assert dirichlet_sum(3, 6, 0.0) == 3
    t = 7.3
    expected = sum(n ** (-1j * t) for n in range(11, 21))
    assert abs(dirichlet_sum(10, 20, t) - expected) < 1e-12
    with pytest.raises(DomainError):
        dirichlet_sum(10, 25, 1.0)
    assert abs(dirichlet_sum(100, 200, 50.0)) <= 100 + 1e-9
    assert math.isfinite(abs(dirichlet_sum(1, 2, 1e6)))


def test_fourth_moment_monotone_and_simpson_oracle(engine):
    assert fourth_moment(200.0, engine)[0] > fourth_moment(100.0, engine)[0]
    t = np.linspace(0.0, 100.0, 100001)
    ref = integrate.simpson(z_hardy(t) ** 4, x=t)
    assert fourth_moment(100.0, engine)[0] == pytest.approx(ref, rel=1e-5)


def test_fit_residual_below_e2_scale(engine, coeffs):
    T = np.linspace(500.0, 5000.0, 4000)
    # the fit is made on M(T)/T, so compare residuals with E2/T
    scale = np.sqrt(np.mean((e2(T, coeffs, engine) / T) ** 2))
    assert coeffs.residual_rms <= scale * (1 + 1e-12)
    assert np.max(np.abs(e2(T, coeffs, engine))) < 10 * np.sqrt(T).max() * np.log(T).max() ** 4


def test_pinned_fit_reproduces_pinned_value(coeffs):
    assert coeffs.a[4] == A4 and coeffs.tags[4] == "pinned"


def test_e2_mean_square_against_trapezoid(engine, coeffs):
    t = np.arange(1e-6, 1000.0 + 1e-9, 0.05)
    t[0] = 1e-9
    ref = integrate.trapezoid(e2(t, coeffs, engine) ** 2, t)
    assert e2_mean_square(1000.0, coeffs, engine) == pytest.approx(ref, rel=1e-2)
    assert e2_mean_square(0.0, coeffs, engine) == 0.0
    assert e2_running_integral(0.0, coeffs, engine) == 0.0


def test_running_integral_takes_both_signs(engine, coeffs):
    T = np.arange(100.0, 5000.0, 1.0)
    prof = e2_running_profile(T, coeffs, 1, engine)
    assert prof.min() < 0 < prof.max()


def test_dirichlet_sum_square_root_cancellation():
    assert abs(dirichlet_sum(1000, 2000, 1e5)) / math.sqrt(1000) < 5.0
