import cmath
import logging
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from zetamellin import spectral as sp
from zetamellin.errors import BracketError, CoverageError, DataError, DomainError
from zetamellin.numerics import r1


def make_dataset(kappas, seed=0, coverage=None):
    rng = np.random.default_rng(seed)
    recs = [sp.SpectralRecord(float(k), float(rng.uniform(0.1, 2.0)), float(rng.uniform(0.0, 2.0)),
                              int(rng.choice([-1, 1]))) for k in kappas]
    return sp.SpectralDataset(recs, "test", "memory", coverage)


def dense_dataset(lo=1.0, hi=60.0, n=600, seed=1):
    k = np.sort(np.random.default_rng(seed).uniform(lo, hi, n))
    k = np.unique(k)
    return make_dataset(k, seed, (lo - 1.0, hi + 1.0))


# --------------------------------------------------------------------------
# records, loading and export
# --------------------------------------------------------------------------

@pytest.mark.parametrize("fields", [(-1.0, 1.0, 1.0, 1), (1.0, 0.0, 1.0, 1), (1.0, 1.0, -0.1, 1),
                                    (1.0, 1.0, 1.0, 0)])
def test_record_invariants(fields):
    with pytest.raises(DataError):
        sp.SpectralRecord(*fields)


def test_weight_is_alpha_h_cubed():
    assert sp.weight(sp.SpectralRecord(3.0, 2.0, 1.5, -1)) == pytest.approx(2.0 * 1.5 ** 3)


def test_fixture_contents():
    ds = sp.synthetic_fixture()
    assert len(ds) == 3
    assert ds.coverage == sp.FIXTURE_COVERAGE
    assert list(ds.kappa) == [10.0, 10.5, 12.25]
    assert len(ds.checksum) == 64


@pytest.mark.parametrize("body, match", [
    ("kappa,alpha,h\n", "header"),
    ("kappa,alpha,h_half,parity\n1,2,3\n", ":2: expected 4 fields"),
    ("kappa,alpha,h_half,parity\n1,x,3,1\n", ":2: non-numeric"),
    ("kappa,alpha,h_half,parity\n1,1,1,1\n2,1,1,3\n", ":3: parity"),
    ("kappa,alpha,h_half,parity\n1,-1,1,1\n", ":2: alpha"),
    ("kappa,alpha,h_half,parity\n2,1,1,1\n1,1,1,1\n", ":3: .*unsorted"),
])
def test_loader_errors_name_the_row(tmp_path, body, match):
    p = tmp_path / "s.csv"
    p.write_text(body)
    with pytest.raises(DataError, match=match):
        sp.load_spectral(p)


def test_loader_missing_file(tmp_path):
    with pytest.raises(DataError, match="cannot read"):
        sp.load_spectral(tmp_path / "nope.csv")


def test_empty_dataset_has_no_coverage(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("kappa,alpha,h_half,parity\n")
    ds = sp.load_spectral(p)
    assert len(ds) == 0 and ds.coverage is None
    with pytest.raises(CoverageError, match="empty"):
        sp.sum_window(ds, 5.0, 1.0)
    with pytest.raises(CoverageError, match="empty"):
        sp.unit_window_scan(ds)


def test_export_round_trip(tmp_path):
    ds = dense_dataset(n=50)
    sp.export_spectral(ds, tmp_path / "a.csv")
    back = sp.load_spectral(tmp_path / "a.csv")
    assert np.array_equal(back.kappa, ds.kappa) and np.array_equal(back.weights, ds.weights)
    sp.export_spectral(back, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert back.checksum == sp.load_spectral(tmp_path / "b.csv").checksum


def test_declared_coverage_must_contain_records():
    with pytest.raises(DataError):
        make_dataset([5.0, 9.0], coverage=(6.0, 10.0))
    with pytest.raises(DataError):
        make_dataset([5.0, 5.0])


def test_coverage_errors_name_the_window():
    ds = sp.synthetic_fixture()
    with pytest.raises(CoverageError, match=r"\[13.0, 15.0\]"):
        sp.sum_window(ds, 14.0, 1.0)


# --------------------------------------------------------------------------
# window sums
# --------------------------------------------------------------------------

def test_sum_window_on_fixture():
    ds = sp.synthetic_fixture()
    assert sp.sum_window(ds, 10.25, 0.25) == pytest.approx(0.5 * 1.0 + 1.25 * 0.125)
    assert sp.sum_window(ds, 12.25, 0.0) == pytest.approx(2.0 * 8.0)
    with pytest.raises(DomainError):
        sp.sum_window(ds, 10.0, -1.0)


@given(st.floats(5.0, 55.0), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_window_additivity(mid, left, right):
    ds = dense_dataset()
    lo, hi = mid - left, mid + right
    whole = sp.sum_half_open(ds, lo - 1.0, hi)
    parts = sp.sum_half_open(ds, lo - 1.0, mid) + sp.sum_half_open(ds, mid, hi)
    assert whole == pytest.approx(parts, rel=1e-12, abs=1e-12)


@given(st.floats(3.0, 57.0), st.floats(1.0, 500.0))
def test_conj3_triangle_inequality_and_conjugation(K, tau):
    ds = dense_dataset()
    s = sp.conj3_sum(ds, K, tau)
    assert abs(s) <= sp.sum_window(ds, K, 1.0) * (1 + 1e-12)
    assert sp.conj3_sum(ds, K, tau, conjugate=True) == pytest.approx(s.conjugate(), abs=1e-12)


def test_conj3_sum_matches_hand_fold():
    ds = sp.synthetic_fixture()
    tau = 37.0
    # window [10, 12] holds the first two records only
    expected = sum(sp.weight(r) * cmath.exp(1j * r.kappa * math.log(r.kappa / tau))
                   for r in ds.records if abs(r.kappa - 11.0) <= 1.0)
    assert abs(sp.conj3_sum(ds, 11.0, tau) - expected) < 1e-13
    with pytest.raises(DomainError):
        sp.conj3_sum(ds, 11.0, 0.0)


def test_conj3_phase_vanishes_when_tau_equals_kappa():
    ds = make_dataset([7.0], coverage=(0.0, 14.0))
    assert sp.conj3_sum(ds, 7.0, 7.0) == pytest.approx(ds.weights[0])


def test_sup_scan_and_csv(tmp_path):
    ds = dense_dataset(lo=1.0, hi=300.0, n=3000)
    sc = sp.conj3_sup_scan(ds, 100.0, 0.2, 1.0)
    assert sc.K[0] == pytest.approx(100 ** 0.8)
    assert sc.sup == max(abs(v) for v in sc.values)
    assert abs(sp.conj3_sum(ds, sc.K_star, 100.0)) == sc.sup
    sc.write_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "K,tau,re,im,abs" and len(lines) == len(sc.K) + 1
    with pytest.raises(DomainError):
        sp.conj3_sup_scan(ds, 100.0, 1.5, 1.0)
    with pytest.raises(CoverageError):
        sp.conj3_sup_scan(ds, 1000.0, 0.2, 1.0)


def test_unit_window_scan():
    ds = dense_dataset()
    scan = sp.unit_window_scan(ds, exponent=1.01)
    assert scan.K[0] == ds.coverage[0] + 1
    i = 7
    assert scan.ratios[i] == pytest.approx(sp.sum_window(ds, scan.K[i], 1.0) / scan.K[i] ** 1.01)
    assert scan.max_ratio == pytest.approx(scan.ratios.max())


def test_e2_spectral_sum(caplog):
    ds = dense_dataset()
    T = 1e4
    with caplog.at_level(logging.WARNING):
        s = sp.e2_spectral_sum(ds, T, 200.0, T, 50.0)
    assert not caplog.records
    bound = float(np.sum(ds.weights[ds.kappa <= 50.0] * ds.kappa[ds.kappa <= 50.0] ** -1.5))
    assert abs(s) <= bound
    with caplog.at_level(logging.WARNING):
        assert sp.e2_spectral_sum(ds, T, 1e300, T, 50.0) == 0j
    assert "outside" in caplog.text
    with pytest.raises(CoverageError, match="Kmax"):
        sp.e2_spectral_sum(ds, T, 200.0, T, 100.0)


# --------------------------------------------------------------------------
# I(T, t)
# --------------------------------------------------------------------------

def test_phi_integral_at_zero_frequency_is_bump_mass():
    # ramps are complementary, so the mass is the plateau plus one ramp width
    assert sp.phi_integral(100.0, 0.0) == pytest.approx(1.5, abs=1e-12)


def test_phi_integral_against_mpmath():
    T, f = 50.0, 3.7
    bump = sp.smooth_bump(sp.PHI_SPEC)
    ref = sum(mpmath.quad(lambda x: float(bump(float(x))) * mpmath.exp(1j * f * mpmath.log(T * x)), [a, b])
              for a, b in ((0.5, 1.0), (1.0, 2.0), (2.0, 2.5)))
    assert abs(sp.phi_integral(T, f) - complex(ref)) < 1e-10


def test_i_Tt_against_direct_sum_and_bound():
    ds = dense_dataset()
    T, t, eps = 100.0, 30.0, 0.3
    half = T ** eps
    m = np.abs(ds.kappa - t) <= half
    k = ds.kappa[m]
    direct = sum(w * r1(-kj) / (0.5 - 1j * kj) * sp.phi_integral(T, t - kj) for w, kj in zip(ds.weights[m], k))
    value = sp.i_Tt(ds, T, t, eps)
    assert abs(value - direct) < 1e-12 * max(1.0, abs(direct))
    assert abs(value) <= sp.i_Tt_bound(ds, T, t, eps) * (1 + 1e-12)


def test_i_Tt_empty_window():
    ds = make_dataset([2.0, 40.0], coverage=(0.0, 50.0))
    assert sp.i_Tt(ds, 10.0, 20.0, 0.1) == 0j
    assert sp.i_Tt_bound(ds, 10.0, 20.0, 0.1) == 0.0
    assert sp.i_Tt_asymptotic(ds, 10.0, 20.0, 0.1) == 0j


def test_i_Tt_asymptotic_prefactor():
    ds = make_dataset([20.0], coverage=(0.0, 100.0))
    T, eps = 100.0, 0.5
    a = sp.i_Tt_asymptotic(ds, T, 20.0, eps)
    b = sp.i_Tt_asymptotic(ds, T, 21.0, eps)
    ratio = abs(b) / abs(a) * abs(sp.phi_integral(T, 0.0)) / abs(sp.phi_integral(T, 1.0))
    assert ratio == pytest.approx((20.0 / 21.0) ** 1.5, rel=1e-12)


def test_i_Tt_asymptotic_tracks_exact_for_large_kappa():
    ds = make_dataset([2000.0], coverage=(0.0, 3000.0))
    T, t, eps = 1e4, 2000.0, 0.1
    exact = sp.i_Tt(ds, T, t, eps)
    asym = sp.i_Tt_asymptotic(ds, T, t, eps)
    assert abs(exact) == pytest.approx(abs(asym), rel=1e-2)


def test_i_Tt_coverage():
    ds = sp.synthetic_fixture()
    with pytest.raises(CoverageError):
        sp.i_Tt(ds, 100.0, 13.0, 0.5)


# --------------------------------------------------------------------------
# saddle point
# --------------------------------------------------------------------------

@pytest.mark.parametrize("r, T", [(10.0, 1e4), (1.0, 3.0), (50.0, 1e6)])
def test_saddle_derivative_matches_finite_difference(r, T):
    z = np.array([0.5 * r, r, 1.7 * r])
    h = 1e-6 * r
    fd = (sp.saddle_F(z + h, r, T) - sp.saddle_F(z - h, r, T)) / (2 * h)
    assert np.allclose(sp.saddle_dF(z, r, T), fd, rtol=1e-6, atol=1e-9)


@given(st.floats(0.1, 100.0), st.floats(1.5, 1e6))
def test_saddle_z0_is_a_root(r, ratio):
    T = r * ratio
    z0 = sp.saddle_z0(r, T)
    assert r / 2 <= z0 <= 2 * r
    assert abs(sp.saddle_dF(z0, r, T)) < 1e-13 * max(1.0, r / z0)


def test_saddle_z0_against_mpmath_findroot():
    r, T = 10.0, 1e4
    with mpmath.workdps(50):
        ref = mpmath.findroot(lambda z: -r / z + T / (T + z) + r / (T * (mpmath.sqrt(1 + z / T) + 1 + z / T)),
                              mpmath.mpf(r))
        z0 = sp.saddle_z0(r, T, dps=50)
        assert abs(z0 - ref) < mpmath.mpf(10) ** -40
    assert sp.saddle_z0(r, T) == pytest.approx(float(ref), rel=1e-15)


def test_saddle_value_T_derivative_envelope_route():
    # at a critical point dF/dT equals the partial derivative in T with z frozen
    r, T = 10.0, 1e3
    z = sp.saddle_z0(r, T)
    u = z / T
    root = math.sqrt(1 + u)
    partial = math.log1p(u) - u / (1 + u) - r * u / (T * root * (1 + root))
    assert sp.saddle_value_T_derivative(r, T) == pytest.approx(partial, rel=1e-6)


def test_saddle_remainder_is_quartic():
    r = 10.0
    for T in (1e4, 1e5):
        eps = r / T
        assert sp.saddle_expansion_remainder(r, T) == pytest.approx(-eps ** 4 / 128, rel=1e-2)


def test_saddle_domain():
    with pytest.raises(DomainError):
        sp.saddle_z0(5.0, 5.0)
    with pytest.raises(DomainError):
        sp.saddle_F(-1.0, 1.0, 10.0)


def test_saddle_bracket_error(monkeypatch):
    monkeypatch.setattr(sp, "_offset_equation", lambda d, eps, sqrt=math.sqrt: 1.0 + d * d)
    with pytest.raises(BracketError):
        sp.saddle_z0(1.0, 10.0)


def test_saddle_mpmath_precision_is_restored():
    before = mpmath.mp.dps
    sp.saddle_z0(10.0, 1e4, dps=80)
    assert mpmath.mp.dps == before
