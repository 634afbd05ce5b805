"""Gaussian ensembles with a rank-one channel coupling.

Matrices are drawn from the density ``exp(-beta/(4 sigma^2) Tr G G^+)``.  For
``beta=1`` that means diagonal variance ``2 sigma^2`` and off-diagonal variance
``sigma^2``; for ``beta=2`` the diagonal is real with variance ``sigma^2`` and
the off-diagonal real and imaginary parts each have variance ``sigma^2 / 2``.
With this scaling the spectrum fills ``[-2 sigma sqrt(N), 2 sigma sqrt(N)]``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.linalg import eigh_tridiagonal


class EigenSolverError(RuntimeError):
    """Dense diagonalization failed; carries the seed of the offending matrix."""

    def __init__(self, message: str, seed=None):
        super().__init__(f"{message} (seed={seed})")
        self.seed = seed


@dataclass(frozen=True)
class EnsembleParams:
    n: int
    beta: int = 1
    sigma: float = 1.0
    coupling: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if self.beta not in (1, 2):
            raise ValueError(f"beta must be 1 or 2, got {self.beta!r}")
        if not self.sigma > 0 or not math.isfinite(self.sigma):
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        if not math.isfinite(self.coupling):
            raise ValueError(f"coupling must be finite, got {self.coupling!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    @classmethod
    def from_kappa(cls, n: int, kappa: float, beta: int = 1, sigma: float = 1.0,
                   seed: int = 0) -> "EnsembleParams":
        return cls(n=n, beta=beta, sigma=sigma, coupling=kappa * sigma * math.sqrt(n), seed=seed)

    @property
    def kappa(self) -> float:
        return self.coupling / (self.sigma * math.sqrt(self.n))

    @property
    def edge(self) -> float:
        """Semicircle radius ``2 sigma sqrt(N)``."""
        return 2.0 * self.sigma * math.sqrt(self.n)

    def with_coupling(self, coupling: float) -> "EnsembleParams":
        return EnsembleParams(self.n, self.beta, self.sigma, coupling, self.seed)

    def with_kappa(self, kappa: float) -> "EnsembleParams":
        return EnsembleParams.from_kappa(self.n, kappa, self.beta, self.sigma, self.seed)


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for ``(master seed, key...)``.

    Realizations use ``key=(stream, index)`` so that any schedule of workers
    reproduces the serial run bit for bit.  A stream may itself be a tuple of
    integers; it is flattened into the key.
    """
    flat = []
    for k in key:
        flat.extend(k if isinstance(k, tuple) else (k,))
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in flat))
    return np.random.Generator(np.random.PCG64(ss))


def sample_gaussian(params: EnsembleParams, realization: int = 0, stream=0) -> np.ndarray:
    rng = rng_for(params.seed, stream, realization)
    n, s = params.n, params.sigma
    if params.beta == 1:
        a = rng.standard_normal((n, n))
        return s * (a + a.T) / math.sqrt(2.0)
    re = rng.standard_normal((n, n))
    im = rng.standard_normal((n, n))
    a = (re + 1j * im) * (s / math.sqrt(2.0))
    g = (a + a.conj().T) / math.sqrt(2.0)
    # the diagonal of a + a^H is exactly real already; drop the signed zeros
    g[np.diag_indices(n)] = g.diagonal().real
    return g


def apply_rank_one(g: np.ndarray, coupling: float) -> np.ndarray:
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {g.shape}")
    m = g.copy()
    m[0, 0] += coupling
    return m


def dense_eigh(m: np.ndarray, seed=None, eigvals_only: bool = False):
    """Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix.

    Each eigenvector is gauge-fixed so that its largest-magnitude component
    among rows 2..N is real and positive.  Row 1 (the coupled site) never sets
    the gauge, so the sign or phase of the first component stays unbiased even
    when it is the largest one.
    """
    scale = float(np.max(np.abs(m))) or 1.0
    if np.max(np.abs(m - m.conj().T)) > 1e-12 * scale:
        raise ValueError("matrix is not Hermitian to 1e-12 relative")
    driver = "evd" if np.isrealobj(m) else "evr"
    try:
        if eigvals_only:
            return scipy.linalg.eigh(m, eigvals_only=True, driver=driver, check_finite=True)
        w, v = scipy.linalg.eigh(m, driver=driver, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(f"eigendecomposition failed: {exc}", seed) from exc
    cols = np.arange(v.shape[1])
    ref = v[1:] if v.shape[0] > 1 else v
    lead = ref[np.argmax(np.abs(ref), axis=0), cols]
    v = v * (np.abs(lead) / lead)
    return w, v


@dataclass(frozen=True)
class _Spectrum:
    energies: np.ndarray
    weights: np.ndarray
    # first eigenvector components in the dense gauge, when known
    psi1: Optional[np.ndarray] = field(default=None, compare=False)

    _header = ("alpha", "energy", "weight")

    @property
    def n(self) -> int:
        return len(self.energies)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self._header)
            for i, (x, y) in enumerate(zip(self.energies, self.weights), start=1):
                w.writerow((i, f"{x:.17g}", f"{y:.17g}"))

    @classmethod
    def from_csv(cls, path):
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        if tuple(rows[0]) != cls._header:
            raise ValueError(f"{path}: expected header {','.join(cls._header)}, got {','.join(rows[0])}")
        data = np.array([[float(r[1]), float(r[2])] for r in rows[1:]])
        return cls(data[:, 0], data[:, 1])


class UnperturbedSpectrum(_Spectrum):
    """Eigenvalues ``e`` of G and first-component weights ``r = |Phi_1|^2``."""

    _header = ("alpha", "e", "r")

    @property
    def e(self) -> np.ndarray:
        return self.energies

    @property
    def r(self) -> np.ndarray:
        return self.weights


class PerturbedSpectrum(_Spectrum):
    """Eigenvalues ``E`` of M and first-component weights ``z = |Psi_1|^2``."""

    _header = ("alpha", "E", "z")

    @property
    def E(self) -> np.ndarray:
        return self.energies

    @property
    def z(self) -> np.ndarray:
        return self.weights


def extract_spectrum(eigvals: np.ndarray, eigvecs: np.ndarray, perturbed: bool = True):
    psi1 = eigvecs[0, :].copy()
    weights = np.abs(psi1) ** 2
    cls = PerturbedSpectrum if perturbed else UnperturbedSpectrum
    return cls(np.asarray(eigvals, dtype=float), weights, psi1)


def dense_spectrum(params: EnsembleParams, realization: int = 0, stream=0,
                   unperturbed: bool = False):
    """Sample G, add the coupling, diagonalize densely.

    Returns the perturbed spectrum, or ``(perturbed, unperturbed)`` when
    ``unperturbed`` is set.
    """
    g = sample_gaussian(params, realization, stream)
    seed = (params.seed, stream, realization)
    pert = extract_spectrum(*dense_eigh(apply_rank_one(g, params.coupling), seed=seed))
    if not unperturbed:
        return pert
    return pert, extract_spectrum(*dense_eigh(g, seed=seed), perturbed=False)


def fast_sample_spectrum(params: EnsembleParams, realization: int = 0,
                         stream=0) -> UnperturbedSpectrum:
    """Draw ``(e, r)`` for G without forming G.

    Eigenvalues come from the tridiagonal beta-ensemble model with the same
    scaling as :func:`sample_gaussian`; weights are an independent symmetric
    Dirichlet(beta/2) vector.
    """
    rng = rng_for(params.seed, stream, realization)
    n, beta, s = params.n, params.beta, params.sigma
    diag = rng.normal(0.0, s * math.sqrt(2.0 / beta), size=n)
    dof = beta * np.arange(n - 1, 0, -1)
    off = s * np.sqrt(rng.chisquare(dof) / beta)
    e = eigh_tridiagonal(diag, off, eigvals_only=True)
    g = rng.standard_gamma(beta / 2.0, size=n)
    return UnperturbedSpectrum(e, g / g.sum())
