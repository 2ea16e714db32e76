import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from zetamellin.errors import CacheError, DomainError, PoleError
from zetamellin.zeta import (RS_CROSSOVER, Method, SampleCache, quantize, riemann_siegel_z, sample_line,
                             z_deriv_remainder, z_em, z_hardy, z_hardy_deriv, z_method, zeta_em)
from zetamellin.zeta.cache import MAGIC, QUANTUM


@pytest.mark.parametrize("s", [2.0, 0.5 + 14.134725j, 0.5 + 100j, 3 - 40j, -1.5 + 2j, 0.5 + 450j])
def test_zeta_em_against_mpmath(s):
    value, bound = zeta_em(s)
    ref = complex(mpmath.zeta(s))
    assert abs(value - ref) < 1e-11 * max(1.0, abs(ref))
    assert bound < 1e-12


def test_zeta_em_pole_and_arguments():
    with pytest.raises(PoleError):
        zeta_em(1.0)
    with pytest.raises(DomainError):
        zeta_em(2.0, terms=3)
    with pytest.raises(DomainError):
        zeta_em(2.0, corrections=0)


def test_zeta_em_independent_of_truncation():
    s = 0.5 + 321.5j
    a, _ = zeta_em(s)
    b, _ = zeta_em(s, terms=200)
    assert abs(a - b) < 1e-11


@given(st.floats(10.0, 2000.0))
def test_z_hardy_matches_mpmath_siegelz(t):
    assert abs(z_hardy(t) - float(mpmath.siegelz(t))) < 5e-10


def test_riemann_siegel_and_euler_maclaurin_agree_at_crossover():
    t = np.linspace(RS_CROSSOVER - 50, RS_CROSSOVER + 50, 41)
    assert np.max(np.abs(riemann_siegel_z(t) - z_em(t))) < 1e-8


def test_z_hardy_even_and_methods():
    assert z_hardy(25.0) == z_hardy(-25.0)
    assert list(z_method([10.0, 399.9, 400.0, 1e4])) == [1, 1, 0, 0]


def test_first_zero_sign_change():
    t = np.linspace(14.0, 14.2, 201)
    z = z_hardy(t)
    assert np.sum(np.sign(z[1:]) != np.sign(z[:-1])) == 1
    i = int(np.nonzero(np.sign(z[1:]) != np.sign(z[:-1]))[0][0])
    assert t[i] <= 14.134725141734693 <= t[i + 1]


def test_z_hardy_deriv_k0_is_riemann_siegel_main_sum():
    t = 100.0
    assert abs(z_hardy_deriv(t, 0) - z_hardy(t)) <= z_deriv_remainder(t, 0)


def test_z_hardy_deriv_k1_against_finite_difference():
    t, h = 100.0, 1e-4
    fd = (z_hardy(t + h) - z_hardy(t - h)) / (2 * h)
    assert abs(z_hardy_deriv(t, 1) - fd) <= z_deriv_remainder(t, 1)


def test_z_hardy_deriv_k2_against_second_difference():
    t, h = 200.0, 1e-2
    fd = (z_hardy(t + h) - 2 * z_hardy(t) + z_hardy(t - h)) / h ** 2
    assert abs(z_hardy_deriv(t, 2) - fd) <= z_deriv_remainder(t, 2)


def test_z_hardy_deriv_domain():
    with pytest.raises(DomainError):
        z_hardy_deriv(100.0, 5)
    with pytest.raises(DomainError):
        z_hardy_deriv(3.0, 1)


# --------------------------------------------------------------------------
# cache
# --------------------------------------------------------------------------

def test_quantize():
    assert quantize(1.0) == QUANTUM
    with pytest.raises(DomainError):
        quantize(-1.0)


def test_sample_line_counts_and_idempotence(tmp_path):
    cache = SampleCache(tmp_path / "z.bin")
    first = sample_line(10.0, 20.0, 0.01, cache)
    assert len(first) == 1001
    assert cache.misses == 1001
    again = SampleCache(tmp_path / "z.bin")
    second = sample_line(10.0, 20.0, 0.01, again)
    assert again.misses == 0 and again.hits == 1001
    assert np.array_equal(first.z, second.z)


def test_sample_line_values_and_methods(tmp_path):
    cache = SampleCache(tmp_path / "z.bin")
    line = sample_line(390.0, 410.0, 0.5, cache)
    assert np.array_equal(line.z, z_hardy(line.t))
    methods = {s.method for s in line}
    assert methods == {Method(0), Method(1)}


def test_summary_max_matches_cache_scan(tmp_path):
    cache = SampleCache(tmp_path / "z.bin")
    line = sample_line(10.0, 100.0, 0.05, cache)
    stored = SampleCache(tmp_path / "z.bin")
    assert np.max(np.abs(line.z)) == np.max(np.abs(stored.z))


def test_cache_file_layout(tmp_path):
    path = tmp_path / "z.bin"
    sample_line(10.0, 11.0, 0.25, SampleCache(path))
    raw = path.read_bytes()
    assert raw[:8] == MAGIC
    assert (len(raw) - 8) % 17 == 0
    path.write_bytes(b"BADMAGIC" + raw[8:])
    with pytest.raises(CacheError, match="magic"):
        SampleCache(path)


def test_cache_merges_concurrent_writers(tmp_path):
    path = tmp_path / "z.bin"
    a, b = SampleCache(path), SampleCache(path)
    sample_line(10.0, 11.0, 0.25, a)
    sample_line(20.0, 21.0, 0.25, b)
    merged = SampleCache(path)
    assert len(merged) == 10
    assert merged.coverage() == (10.0, 21.0)


def test_sample_line_rejects_bad_grid(tmp_path):
    cache = SampleCache(tmp_path / "z.bin")
    with pytest.raises(DomainError):
        sample_line(20.0, 10.0, 0.1, cache)
    with pytest.raises(DomainError):
        sample_line(10.0, 20.0, 1e-5, cache)


def test_sample_line_worker_count_does_not_change_values(tmp_path):
    a = sample_line(400.0, 420.0, 0.01, SampleCache(tmp_path / "a.bin"), workers=1)
    b = sample_line(400.0, 420.0, 0.01, SampleCache(tmp_path / "b.bin"), workers=2)
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    assert np.array_equal(a.z, b.z)


def test_zeta_em_classical_values():
    assert abs(zeta_em(2.0)[0] - np.pi ** 2 / 6) < 1e-13
    assert abs(zeta_em(0.0)[0] + 0.5) < 1e-13
    a, _ = zeta_em(0.5)
    b, _ = zeta_em(0.5, terms=60)
    assert abs(a - b) < 1e-10
    assert abs(a.real + 1.4603545) < 1e-7


def test_z_hardy_at_origin_is_zeta_half():
    assert z_hardy(0.0) == pytest.approx(zeta_em(0.5)[0].real, abs=1e-12)


def test_zero_count_up_to_100():
    # all zeros below 100 lie in [10, 100] and are simple, so sign changes on a fine grid find each once
    t = np.arange(10.0, 100.0, 0.01)
    z = z_hardy(t)
    idx = np.nonzero(np.sign(z[1:]) != np.sign(z[:-1]))[0]
    assert len(idx) == int(mpmath.nzeros(100))
    for n, i in enumerate(idx, start=1):
        assert t[i] <= float(mpmath.zetazero(n).imag) <= t[i + 1]


def test_spot_value_against_oracle(tmp_path):
    line = sample_line(14.0, 14.25, 0.01, SampleCache(tmp_path / "z.bin"))
    i = int(np.argmin(np.abs(line.t - 14.13)))
    assert abs(abs(line.z[i]) - abs(zeta_em(0.5 + 1j * line.t[i])[0])) < 1e-8


def test_cache_round_trip_is_bit_exact(tmp_path):
    path = tmp_path / "z.bin"
    line = sample_line(100.0, 101.0, 1 / 64, SampleCache(path))
    back = SampleCache(path)
    assert np.array_equal(back.z, line.z)
    assert back.to_bytes() == path.read_bytes()
