"""Empirical statistics over sampled spectra."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .ensembles import PerturbedSpectrum


class DegenerateSampleError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyWindow:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"window needs lo < hi, got [{self.lo}, {self.hi}]")

    @classmethod
    def scaled(cls, lo: float, hi: float, n: int, sigma: float = 1.0) -> "EnergyWindow":
        """Window given in units of ``sigma sqrt(n)``."""
        u = sigma * math.sqrt(n)
        return cls(lo * u, hi * u)

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, E):
        E = np.asarray(E)
        return (E > self.lo) & (E < self.hi)


@dataclass
class SampleSet:
    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sample values must be finite")

    @property
    def count(self) -> int:
        return int(self.values.size)

    @property
    def empty(self) -> bool:
        return self.values.size == 0


SCALES = ("width", "amplitude", "real", "imag")


def window_select(spectra: Iterable[PerturbedSpectrum], window: EnergyWindow,
                  scale: str = "width", exclude_top: bool = False,
                  rng: Optional[np.random.Generator] = None) -> SampleSet:
    """Collect ``N z`` (widths) or signed ``sqrt(N) Psi_1`` (amplitudes) in a window.

    ``real``/``imag`` take the parts of a complex first component scaled by
    ``sqrt(2N)``, so each part has the same variance ``l(E)`` as a real
    amplitude.  When a spectrum carries no first components the sign (or phase)
    is drawn from ``rng``; the spectra never depend on it.
    ``exclude_top`` drops the highest state of every spectrum.
    """
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {SCALES}, got {scale!r}")
    spectra = list(spectra)
    if not spectra:
        raise ValueError("window_select needs at least one spectrum")
    chunks = []
    excluded = 0
    for spec in spectra:
        n = spec.n
        mask = window.contains(spec.E)
        if exclude_top:
            top = int(np.argmax(spec.E))
            excluded += bool(mask[top])
            mask[top] = False
        z = spec.z[mask]
        if scale == "width":
            chunks.append(n * z)
            continue
        psi = None if spec.psi1 is None else spec.psi1[mask]
        if psi is None:
            if rng is None:
                raise ValueError("amplitudes without first components need an rng")
            if scale == "amplitude":
                psi = np.sqrt(z) * rng.choice((-1.0, 1.0), size=z.size)
            else:
                psi = np.sqrt(z) * np.exp(2j * np.pi * rng.random(z.size))
        if scale == "amplitude":
            if np.iscomplexobj(psi):
                raise ValueError("complex first components: select 'real' or 'imag'")
            chunks.append(math.sqrt(n) * psi)
        else:
            part = psi.real if scale == "real" else np.imag(psi)
            chunks.append(math.sqrt(2 * n) * part)
    values = np.concatenate(chunks) if chunks else np.empty(0)
    return SampleSet(values, {"window": [window.lo, window.hi], "scale": scale,
                              "realizations": len(spectra), "excluded_top": excluded})


def empirical_moment(s: SampleSet, q: float) -> tuple[float, float]:
    """Mean of ``values**q`` and its standard error."""
    if s.count < 2:
        raise DegenerateSampleError("empirical_moment needs at least 2 samples")
    v = s.values ** q
    mean = float(np.mean(v))
    return mean, float(np.std(v, ddof=1) / math.sqrt(v.size))


def gaussian_fit(s: SampleSet) -> tuple[float, float]:
    """Maximum-likelihood mean and variance."""
    if s.count < 10:
        raise DegenerateSampleError("gaussian_fit needs at least 10 samples")
    mean = float(np.mean(s.values))
    var = float(np.mean((s.values - mean) ** 2))
    if var == 0:
        raise DegenerateSampleError("zero variance sample")
    return mean, var


def variance_stderr(s: SampleSet) -> float:
    """Standard error of the ML variance, from the fourth central moment."""
    c = s.values - np.mean(s.values)
    m2 = np.mean(c * c)
    m4 = np.mean(c**4)
    return float(math.sqrt(max(m4 - m2 * m2, 0.0) / s.count))


def kolmogorov_sf(lam: float) -> float:
    """Survival function of the Kolmogorov distribution."""
    if lam <= 0:
        return 1.0
    if lam < 1.0:
        # theta-function form converges fast for small arguments
        k = np.arange(1, 101)
        cdf = math.sqrt(2 * math.pi) / lam * np.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8 * lam * lam)).sum()
        return float(min(max(1.0 - cdf, 0.0), 1.0))
    k = np.arange(1, 101)
    return float(min(max(2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k * k * lam * lam)), 0.0), 1.0))


def ks_statistic(s: SampleSet, cdf: Callable) -> tuple[float, float]:
    """Two-sided one-sample KS distance and its asymptotic p-value."""
    if s.count < 10:
        raise DegenerateSampleError("ks_statistic needs at least 10 samples")
    x = np.sort(s.values)
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    return d, kolmogorov_sf(math.sqrt(n) * d)


def ks_2samp(a, b) -> tuple[float, float]:
    """Two-sample KS distance and asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size < 10 or b.size < 10:
        raise DegenerateSampleError("ks_2samp needs at least 10 samples per side")
    both = np.concatenate([a, b])
    fa = np.searchsorted(a, both, side="right") / a.size
    fb = np.searchsorted(b, both, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    ne = a.size * b.size / (a.size + b.size)
    return d, kolmogorov_sf(math.sqrt(ne) * d)


def normal_cdf(variance: float, mean: float = 0.0):
    from scipy.special import ndtr

    sd = math.sqrt(variance)
    return lambda x: ndtr((np.asarray(x) - mean) / sd)


@dataclass
class Histogram:
    edges: np.ndarray
    density: np.ndarray

    @property
    def area(self) -> float:
        return float(np.sum(self.density * np.diff(self.edges)))

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def rows(self):
        return [(lo, hi, d) for lo, hi, d in zip(self.edges[:-1], self.edges[1:], self.density)]

    def to_csv(self, path) -> None:
        write_csv(path, ("bin_lo", "bin_hi", "density"), self.rows())


MAX_BINS = 1000


def _fd_bins(values: np.ndarray, range) -> int:
    """Freedman-Diaconis bin count, Sturges when the IQR vanishes, capped at MAX_BINS."""
    lo, hi = range if range is not None else (values.min(), values.max())
    q75, q25 = np.percentile(values, [75, 25])
    width = 2.0 * (q75 - q25) * values.size ** (-1.0 / 3.0)
    if width <= 0 or hi <= lo:
        return int(math.ceil(math.log2(values.size))) + 1
    return int(min(max(math.ceil((hi - lo) / width), 1), MAX_BINS))


def histogram(s: SampleSet, bins=None, range: Optional[Sequence[float]] = None) -> Histogram:
    """Density-normalized histogram; Freedman-Diaconis bins by default."""
    if s.empty:
        raise DegenerateSampleError("histogram of an empty sample")
    if bins is not None and int(bins) < 1:
        raise ValueError("bins must be >= 1")
    nb = _fd_bins(s.values, range) if bins is None else int(bins)
    edges = np.histogram_bin_edges(s.values, bins=nb, range=range)
    counts, edges = np.histogram(s.values, bins=edges)
    total = counts.sum()
    if total == 0:
        raise DegenerateSampleError("no samples inside the histogram range")
    return Histogram(edges, counts / (total * np.diff(edges)))


def moments_table(s: SampleSet, qs: Sequence[float]):
    return [(q, *empirical_moment(s, q)) for q in qs]


def write_csv(path, header, rows) -> None:
    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.17g}"
        return str(v)

    lines = [",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")
