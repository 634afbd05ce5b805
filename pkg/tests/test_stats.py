import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from ptrank import stats
from ptrank.ensembles import EnsembleParams, PerturbedSpectrum, dense_spectrum


def test_window_geometry():
    w = stats.EnergyWindow.scaled(-0.5, 0.5, 400)
    assert (w.lo, w.hi) == (-10.0, 10.0)
    assert w.center == 0.0
    assert list(w.contains([-10.0, 0.0, 9.99, 10.0])) == [False, True, True, False]
    with pytest.raises(ValueError):
        stats.EnergyWindow(1.0, 1.0)


def _spec():
    E = np.array([-2.0, -0.5, 0.1, 0.4, 3.0])
    psi = np.array([0.1, -0.3, 0.5, -0.2, 0.0])
    psi[-1] = math.sqrt(1 - np.sum(psi[:-1] ** 2))
    return PerturbedSpectrum(E, psi**2, psi)


def test_window_select_scales():
    s = _spec()
    w = stats.EnergyWindow(-1.0, 5.0)
    widths = stats.window_select([s], w, "width")
    assert np.allclose(widths.values, 5 * s.z[1:])
    amps = stats.window_select([s], w, "amplitude")
    assert np.allclose(amps.values, math.sqrt(5) * s.psi1[1:])
    top = stats.window_select([s], w, "width", exclude_top=True)
    assert top.count == 3 and top.provenance["excluded_top"] == 1
    with pytest.raises(ValueError):
        stats.window_select([s], w, "bogus")
    with pytest.raises(ValueError):
        stats.window_select([], w)


def test_window_select_complex_parts():
    p = EnsembleParams(30, beta=2, seed=3)
    spec = dense_spectrum(p, 0)
    w = stats.EnergyWindow(-100, 100)
    re = stats.window_select([spec], w, "real").values
    im = stats.window_select([spec], w, "imag").values
    assert np.allclose((re**2 + im**2) / 2, 30 * spec.z)
    with pytest.raises(ValueError):
        stats.window_select([spec], w, "amplitude")


def test_window_select_draws_signs_without_components():
    s = _spec()
    bare = PerturbedSpectrum(s.E, s.z)
    w = stats.EnergyWindow(-5, 5)
    with pytest.raises(ValueError):
        stats.window_select([bare], w, "amplitude")
    v = stats.window_select([bare], w, "amplitude", rng=np.random.default_rng(0)).values
    assert np.allclose(v**2, 5 * s.z)


def test_moments_and_fit():
    x = stats.SampleSet(np.arange(1.0, 11.0))
    mean, se = stats.empirical_moment(x, 1)
    assert mean == 5.5 and se == pytest.approx(np.std(x.values, ddof=1) / math.sqrt(10))
    m, v = stats.gaussian_fit(x)
    assert (m, v) == pytest.approx((5.5, 8.25))
    assert stats.moments_table(x, [1, 2])[1][1] == pytest.approx(38.5)
    with pytest.raises(stats.DegenerateSampleError):
        stats.empirical_moment(stats.SampleSet([1.0]), 1)
    with pytest.raises(stats.DegenerateSampleError):
        stats.gaussian_fit(stats.SampleSet(np.ones(20)))
    with pytest.raises(ValueError):
        stats.SampleSet([1.0, np.nan])


def test_variance_stderr_gaussian():
    rng = np.random.default_rng(0)
    s = stats.SampleSet(rng.normal(0, 2, 200_000))
    assert stats.variance_stderr(s) == pytest.approx(4 * math.sqrt(2 / s.count), rel=0.02)


@pytest.mark.parametrize("lam", [0.05, 0.3, 0.6, 0.99, 1.0, 1.36, 2.0, 4.0])
def test_kolmogorov_sf_against_scipy(lam):
    assert stats.kolmogorov_sf(lam) == pytest.approx(sps.kstwobign.sf(lam), abs=1e-12)


def test_ks_statistic_against_scipy():
    rng = np.random.default_rng(5)
    x = rng.normal(0, 1.1, 3000)
    d, p = stats.ks_statistic(stats.SampleSet(x), stats.normal_cdf(1.0))
    ref = sps.kstest(x, "norm", method="asymp")
    assert d == pytest.approx(ref.statistic, abs=1e-14)
    assert p == pytest.approx(ref.pvalue, rel=1e-6)


def test_ks_2samp_against_scipy():
    rng = np.random.default_rng(6)
    a, b = rng.normal(size=700), rng.normal(0.1, 1, size=900)
    d, p = stats.ks_2samp(a, b)
    ref = sps.ks_2samp(a, b, method="asymp")
    assert d == pytest.approx(ref.statistic, abs=1e-14)
    # limiting Kolmogorov law at the effective sample size
    ne = a.size * b.size / (a.size + b.size)
    assert p == pytest.approx(sps.kstwobign.sf(math.sqrt(ne) * d), rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=10, max_size=200))
def test_ks_distance_bounds(xs):
    d, p = stats.ks_statistic(stats.SampleSet(xs), stats.normal_cdf(1.0))
    assert 0.0 <= d <= 1.0 and 0.0 <= p <= 1.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=300), st.one_of(st.none(), st.integers(1, 50)))
def test_histogram_area(xs, bins):
    h = stats.histogram(stats.SampleSet(xs), bins)
    assert h.area == pytest.approx(1.0, rel=1e-9)
    assert len(h.centers) == len(h.density)


def test_histogram_csv(tmp_path):
    h = stats.histogram(stats.SampleSet([0.0, 1.0, 1.0, 2.0]), bins=2)
    h.to_csv(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "bin_lo,bin_hi,density" and len(lines) == 3
    with pytest.raises(ValueError):
        stats.histogram(stats.SampleSet([0.0, 1.0]), bins=0)
