import math

import numpy as np
import pytest
from scipy import stats as sps

from ptrank.ensembles import (EnsembleParams, PerturbedSpectrum, UnperturbedSpectrum,
                              apply_rank_one, dense_eigh, dense_spectrum, extract_spectrum,
                              fast_sample_spectrum, rng_for, sample_gaussian)


def test_params_validation():
    with pytest.raises(ValueError):
        EnsembleParams(n=1)
    with pytest.raises(ValueError):
        EnsembleParams(n=10, beta=4)
    with pytest.raises(ValueError):
        EnsembleParams(n=10, sigma=0.0)
    with pytest.raises(ValueError):
        EnsembleParams(n=10, coupling=float("nan"))


def test_kappa_roundtrip():
    p = EnsembleParams.from_kappa(400, 1.5, sigma=2.0)
    assert p.coupling == pytest.approx(1.5 * 2.0 * 20.0)
    assert p.kappa == pytest.approx(1.5)
    assert p.edge == pytest.approx(80.0)
    assert p.with_kappa(0.5).coupling == pytest.approx(20.0)


def test_streams_are_deterministic_and_distinct():
    a = rng_for(5, 1, 0).standard_normal(4)
    assert np.array_equal(a, rng_for(5, 1, 0).standard_normal(4))
    assert not np.array_equal(a, rng_for(5, 1, 1).standard_normal(4))
    assert not np.array_equal(a, rng_for(6, 1, 0).standard_normal(4))
    # tuple streams flatten into the key
    assert np.array_equal(rng_for(5, (1, 2), 3).random(3), rng_for(5, 1, 2, 3).random(3))


@pytest.mark.parametrize("beta", [1, 2])
def test_gaussian_is_hermitian(beta):
    g = sample_gaussian(EnsembleParams(50, beta, seed=3))
    assert np.array_equal(g, g.conj().T)
    assert np.all(np.imag(np.diag(g)) == 0)


def test_goe_entry_variances():
    n = 400
    g = sample_gaussian(EnsembleParams(n, 1, sigma=1.5, seed=4))
    off = g[np.triu_indices(n, 1)]
    assert np.var(off) == pytest.approx(1.5**2, rel=0.02)
    assert np.var(np.diag(g)) == pytest.approx(2 * 1.5**2, rel=0.2)


def test_gue_entry_variances():
    n = 400
    g = sample_gaussian(EnsembleParams(n, 2, seed=4))
    off = g[np.triu_indices(n, 1)]
    assert np.var(off.real) == pytest.approx(0.5, rel=0.02)
    assert np.var(off.imag) == pytest.approx(0.5, rel=0.02)
    assert np.var(np.diag(g).real) == pytest.approx(1.0, rel=0.2)


def test_semicircle_edge():
    p = EnsembleParams(400, 1, seed=9)
    e = dense_eigh(sample_gaussian(p), eigvals_only=True)
    assert abs(e[-1] - p.edge) < 0.05 * p.edge
    assert abs(e[0] + p.edge) < 0.05 * p.edge


def test_apply_rank_one_touches_only_corner():
    g = sample_gaussian(EnsembleParams(6, seed=1))
    m = apply_rank_one(g, 2.5)
    d = m - g
    assert d[0, 0] == pytest.approx(2.5)
    d[0, 0] = 0
    assert not d.any()
    with pytest.raises(ValueError):
        apply_rank_one(np.zeros((2, 3)), 1.0)


@pytest.mark.parametrize("beta", [1, 2])
def test_dense_eigh_matches_numpy(beta):
    m = sample_gaussian(EnsembleParams(40, beta, seed=2))
    w, v = dense_eigh(m)
    assert np.allclose(w, np.linalg.eigvalsh(m), atol=1e-12)
    assert np.allclose(m @ v, v * w, atol=1e-10)
    assert np.allclose(v.conj().T @ v, np.eye(40), atol=1e-12)
    lead = v[1:][np.argmax(np.abs(v[1:]), axis=0), np.arange(40)]
    assert np.all(lead.real > 0) and np.allclose(lead.imag, 0)


@pytest.mark.parametrize("beta", [1, 2])
def test_first_component_gauge_is_unbiased(beta):
    """The coupled row never fixes the gauge, even when it dominates."""
    m = sample_gaussian(EnsembleParams(30, beta, seed=8))
    m[0, 0] += 40.0   # the top eigenvector is concentrated on row 1
    _, v = dense_eigh(m)
    top = v[:, -1]
    assert abs(top[0]) > np.max(np.abs(top[1:]))
    lead = top[1:][np.argmax(np.abs(top[1:]))]
    assert lead.real > 0 and abs(np.imag(lead)) < 1e-14


def test_dense_eigh_rejects_non_hermitian():
    with pytest.raises(ValueError):
        dense_eigh(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_weights_sum_to_one(small_params):
    pert, unp = dense_spectrum(small_params, 0, unperturbed=True)
    assert pert.z.sum() == pytest.approx(1.0, abs=1e-12)
    assert unp.r.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(pert.E) >= 0)


def test_csv_roundtrip(tmp_path, small_params):
    pert, unp = dense_spectrum(small_params, 0, unperturbed=True)
    pert.to_csv(tmp_path / "p.csv")
    unp.to_csv(tmp_path / "u.csv")
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "alpha,E,z"
    back = PerturbedSpectrum.from_csv(tmp_path / "p.csv")
    assert np.array_equal(back.E, pert.E) and np.array_equal(back.z, pert.z)
    assert np.array_equal(UnperturbedSpectrum.from_csv(tmp_path / "u.csv").r, unp.r)
    with pytest.raises(ValueError):
        UnperturbedSpectrum.from_csv(tmp_path / "p.csv")


def test_extract_spectrum_keeps_first_components(small_params):
    w, v = dense_eigh(sample_gaussian(small_params))
    s = extract_spectrum(w, v, perturbed=False)
    assert isinstance(s, UnperturbedSpectrum)
    assert np.array_equal(s.psi1, v[0])


@pytest.mark.parametrize("beta", [1, 2])
def test_fast_sampler_matches_dense(beta):
    """Tridiagonal eigenvalues and Dirichlet weights reproduce the dense laws."""
    p = EnsembleParams(120, beta, seed=21)
    fe, fr, de, dr = [], [], [], []
    for i in range(25):
        f = fast_sample_spectrum(p, i, stream=1)
        _, d = dense_spectrum(p, i, stream=2, unperturbed=True)
        fe.append(f.e), fr.append(f.r), de.append(d.e), dr.append(d.r)
    assert sps.ks_2samp(np.concatenate(fe), np.concatenate(de)).statistic < 0.02
    assert sps.ks_2samp(np.concatenate(fr), np.concatenate(dr)).pvalue > 1e-3
    assert math.isclose(f.r.sum(), 1.0, abs_tol=1e-12)
