import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from ptrank import theory

N = 1000
U = math.sqrt(N)


def quad(f, a, b, **kw):
    return integrate.quad(f, a, b, epsabs=1e-12, epsrel=1e-12, limit=400, **kw)[0]


def test_wigner_normalization_and_count():
    assert quad(lambda E: theory.wigner_density(E, N), -2 * U, 2 * U) == pytest.approx(N, rel=1e-10)
    assert theory.wigner_count(-3 * U, N) == 0.0
    assert theory.wigner_count(0.0, N) == pytest.approx(N / 2)
    assert theory.wigner_count(3 * U, N) == pytest.approx(N)
    x = 0.7 * U
    assert theory.wigner_count(x, N) == pytest.approx(quad(lambda E: theory.wigner_density(E, N), -2 * U, x))


def test_green_function_branch():
    E = np.linspace(-1.9 * U, 1.9 * U, 9)
    g = theory.green0(E, N)
    assert np.all(g.imag <= 0)
    assert np.allclose(-N / math.pi * g.imag, theory.wigner_density(E, N), rtol=1e-12)
    far = theory.green0(np.array([50 * U, -50 * U]), N)
    assert np.allclose(far.real * np.array([50 * U, -50 * U]), 1.0, rtol=1e-3)


@pytest.mark.parametrize("kappa", [0.3, 0.6, 0.9, 1.5, 3.0])
def test_density_correction_integral(kappa):
    total = quad(lambda p: theory.bulk_density_correction(p, kappa, N), 0, math.pi)
    want = N if kappa < 1 else N - 1 + kappa**-2
    assert total == pytest.approx(want, abs=1e-8)


@pytest.mark.parametrize("kappa", [0.3, 0.6, 1.5, 3.0])
def test_exact_density_correction_integral(kappa):
    total = quad(lambda p: theory.bulk_density_correction(p, kappa, N, exact=True), 0, math.pi)
    assert total == pytest.approx(N if kappa < 1 else N - 1, abs=1e-8)


def test_density_correction_zero_coupling_is_semicircle():
    phi = np.linspace(0.01, math.pi - 0.01, 30)
    E = 2 * U * np.cos(phi)
    for exact in (False, True):
        got = theory.bulk_density(E, 0.0, N, exact=exact)
        assert np.allclose(got, theory.wigner_density(E, N), rtol=1e-12)


def test_density_correction_from_resolvent():
    """The O(1) term equals -(1/pi) Im d/dE log(1 - Z G0(E))."""
    kappa = 0.6
    z = kappa * U
    for E in (-1.2 * U, -0.3 * U, 0.4 * U, 1.7 * U):
        h = 1e-4 * U
        f = lambda x: np.log(1 - z * theory.green0(x, N))
        d = (f(E + h) - f(E - h)) / (2 * h)
        corr = theory.bulk_density(E, kappa, N, exact=True) - theory.wigner_density(E, N)
        assert corr == pytest.approx(-d.imag / math.pi, rel=1e-6)


def test_singular_coupling_rejected():
    with pytest.raises(theory.DomainError):
        theory.bulk_density_correction(1.0, 1.0, N)


def test_collective_state():
    cs = theory.collective_state(1.5, N)
    assert cs.e_c == pytest.approx(U * (1.5 + 1 / 1.5))
    assert cs.z_c == pytest.approx(5 / 9)
    assert cs.half_width_a == pytest.approx(2 * 5 / 9)
    a = cs.half_width_a
    total = quad(lambda E: theory.collective_density(E, 1.5, N), cs.e_c - a, cs.e_c + a)
    assert total == pytest.approx(5 / 9, rel=1e-8)
    with pytest.raises(theory.DomainError):
        theory.collective_state(0.9, N)


def test_l_of_E_values_and_domain():
    assert theory.l_of_E(0.0, 0.6, N) == pytest.approx(1 / 1.36)
    assert theory.l_of_E(0.0, 0.0, N) == 1.0
    with pytest.raises(theory.DomainError, match="E=100.0"):
        theory.l_of_E(np.array([0.0, 100.0]), 0.6, N)


@pytest.mark.parametrize("beta", [1, 2])
@pytest.mark.parametrize("l", [0.3, 1.0, 2.5])
def test_modified_pt_pdf(beta, l):
    f = lambda x: theory.modified_pt_pdf(x, l, beta)
    assert quad(f, 0, 1) + quad(f, 1, np.inf) == pytest.approx(1.0, abs=1e-9)
    mean = quad(lambda x: x * f(x), 0, 1) + quad(lambda x: x * f(x), 1, np.inf)
    assert mean == pytest.approx(l, rel=1e-9)
    x = np.linspace(0.1, 8, 20)
    ref = np.exp(-x * beta / (2 * l)) * x ** (beta / 2 - 1)
    ref /= special.gamma(beta / 2) * (2 * l / beta) ** (beta / 2)
    assert np.allclose(f(x), ref, rtol=1e-12)
    cdf = theory.modified_pt_cdf(x, l, beta)
    assert np.allclose(cdf, [quad(f, 0, t) for t in x], atol=1e-9)


def test_gaussian_moment():
    assert theory.gaussian_moment(1, 1) == pytest.approx(1.0)
    assert theory.gaussian_moment(2, 1) == pytest.approx(3.0)
    assert theory.gaussian_moment(2, 2) == pytest.approx(2.0)


def test_lagrange_mu_branches():
    assert theory.lagrange_mu(0.6, 1, N) == theory.lagrange_mu(0.6, 1, N, z_c=0.0)
    k = 1.5
    assert theory.lagrange_mu(k, 2, N, z_c=1 - k**-2) == pytest.approx(N * (1 + k * k), rel=1e-15)
    with pytest.raises(theory.DomainError):
        theory.lagrange_mu(1.5, 1, N)
    with pytest.raises(theory.DomainError):
        theory.lagrange_mu(1.5, 1, N, z_c=0.0)


def test_window_moment_full_bulk():
    assert theory.window_moment(1, -3 * U, 3 * U, 0.6, 1, N) == pytest.approx(1.0, abs=1e-9)
    assert theory.window_moment(1, -3 * U, 3 * U, 1.5, 1, N) == pytest.approx(1 / 2.25, abs=1e-9)
    assert theory.window_moment(0, -0.5 * U, 0.5 * U, 0.6, 2, N) == pytest.approx(1.0)
    assert theory.window_moment(1, 0.5 * U, 1.5 * U, 0.6, 1, N) == pytest.approx(1.35635, abs=1e-5)
    with pytest.raises(theory.DomainError):
        theory.window_moment(1, 3 * U, 4 * U, 0.6, 1, N)


@pytest.mark.parametrize("beta", [1, 2])
def test_window_pdf_normalized_with_window_mean(beta):
    lo, hi = 0.5 * U, 1.5 * U
    f = lambda x: theory.window_pdf(x, lo, hi, 0.6, beta, N)
    total = quad(f, 0, 1) + quad(f, 1, np.inf)
    assert total == pytest.approx(1.0, abs=1e-7)
    mean = quad(lambda x: x * f(x), 0, 1) + quad(lambda x: x * f(x), 1, np.inf)
    assert mean == pytest.approx(theory.window_moment(1, lo, hi, 0.6, beta, N), rel=1e-7)
    with pytest.raises(theory.DomainError):
        theory.window_pdf(-1.0, lo, hi, 0.6, beta, N)


def _factor_by_quadrature(x, kappa, beta):
    """Full-bulk mixture divided by the unit PT law, integrated over phi."""
    def mix(phi):
        l = 1.0 / (kappa * kappa + 1 - 2 * kappa * math.cos(phi))
        return (2 / math.pi) * math.sin(phi) ** 2 * theory.modified_pt_pdf(x, l, beta)
    return quad(mix, 0, math.pi) / theory.modified_pt_pdf(x, 1.0, beta)


@pytest.mark.parametrize("beta", [1, 2])
@pytest.mark.parametrize("kappa", [0.3, 0.6, 0.9])
def test_fullwindow_factor_against_quadrature(beta, kappa):
    for x in (0.05, 0.5, 1.0, 3.0, 7.0, 10.0):
        assert theory.fullwindow_factor(x, kappa, beta) == pytest.approx(
            _factor_by_quadrature(x, kappa, beta), rel=1e-10)


def test_fullwindow_factor_limits():
    assert np.allclose(theory.fullwindow_factor(np.linspace(0, 10, 11), 0.0, 2), 1.0)
    assert np.allclose(theory.fullwindow_factor(np.linspace(0, 10, 11), 0.0, 1), 1.0)
    assert theory.fullwindow_factor(0.0, 0.4, 2) == pytest.approx(1 + 0.16)
    assert theory.fullwindow_factor(1.0, 0.3, 2) == pytest.approx(0.95694, abs=1e-5)
    with pytest.raises(theory.DomainError):
        theory.fullwindow_factor(-1.0, 0.3, 1)


@pytest.mark.parametrize("beta", [1, 2])
def test_series_is_taylor_expansion(beta):
    """Series and exact factor agree to O(kappa^6) at small coupling."""
    x = np.linspace(0, 3, 13)
    for kappa in (0.05, 0.1):
        err = np.max(np.abs(theory.fullwindow_factor_series(x, kappa, beta)
                            - theory.fullwindow_factor(x, kappa, beta)))
        assert err < 50 * kappa**6


def test_bessel_against_scipy():
    y = np.concatenate([np.linspace(0, 30, 301), [49.9, 100.0, 400.0, 699.0]])
    for nu in (0, 1, 2):
        assert np.allclose(theory.bessel_ive(nu, y), special.ive(nu, y), rtol=1e-13, atol=1e-300)
    assert theory.bessel_i1(0.6) == pytest.approx(0.313704, abs=1e-6)
    with pytest.raises(OverflowError):
        theory.bessel_i1(701.0)
    with pytest.raises(theory.DomainError):
        theory.bessel_ive(1, -1.0)
    with pytest.raises(ValueError):
        theory.bessel_ive(3, 1.0)


def _i1_power_series(y, terms=80):
    return sum((y / 2) ** (2 * k + 1) / (math.factorial(k) * math.factorial(k + 1)) for k in range(terms))


@settings(max_examples=100)
@given(st.floats(0.0, 40.0))
def test_i1_matches_independent_series(y):
    assert theory.bessel_i1(y) == pytest.approx(_i1_power_series(y), rel=1e-12, abs=1e-300)


def test_theory_curve_write(tmp_path):
    c = theory.TheoryCurve([0.0, 1.0], [1.0, 2.0], "F2", {"kappa": 0.3})
    side = c.write(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines() == ["grid,value", "0,1", "1,2"]
    assert '"formula": "F2"' in side.read_text()
    with pytest.raises(ValueError):
        theory.TheoryCurve([1.0, 0.0], [1.0, 2.0], "F2")
    with pytest.raises(ValueError):
        theory.TheoryCurve([0.0, 1.0], [1.0, np.inf], "F2")
