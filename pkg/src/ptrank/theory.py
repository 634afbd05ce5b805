"""Large-N predictions for the rank-one perturbed Gaussian ensembles.

Energies are in the same units as the matrices; ``n`` and ``sigma`` fix the
semicircle radius ``2 sigma sqrt(n)`` and ``kappa = Z / (sigma sqrt(n))``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import integrate, special


class DomainError(ValueError):
    """Argument outside the validity domain of a formula."""


@dataclass(frozen=True)
class CollectiveState:
    e_c: float
    z_c: float
    half_width_a: float


@dataclass
class TheoryCurve:
    grid: np.ndarray
    values: np.ndarray
    formula: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape:
            raise ValueError("grid and values differ in length")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("curve values must be finite")

    def write(self, csv_path) -> Path:
        """Write ``grid,value`` CSV plus a ``.json`` sidecar; returns the sidecar path."""
        csv_path = Path(csv_path)
        lines = ["grid,value"] + [f"{g:.17g},{v:.17g}" for g, v in zip(self.grid, self.values)]
        csv_path.write_text("\n".join(lines) + "\n")
        sidecar = csv_path.with_suffix(".json")
        sidecar.write_text(json.dumps({"formula": self.formula, **self.meta},
                                      indent=2, sort_keys=True) + "\n")
        return sidecar


def _radius(n, sigma):
    return 2.0 * sigma * math.sqrt(n)


def wigner_density(E, n: int, sigma: float = 1.0):
    E = np.asarray(E, dtype=float)
    inside = np.clip(4.0 * n * sigma**2 - E * E, 0.0, None)
    return np.sqrt(inside) / (2.0 * math.pi * sigma**2)


def wigner_count(E, n: int, sigma: float = 1.0):
    """Integrated semicircle density from the lower edge up to ``E``."""
    t = np.clip(np.asarray(E, dtype=float) / _radius(n, sigma), -1.0, 1.0)
    return n * (0.5 + (t * np.sqrt(1.0 - t * t) + np.arcsin(t)) / math.pi)


def green0(E, n: int, sigma: float = 1.0):
    """Mean resolvent of the unperturbed ensemble at ``E + i0``.

    Branch: ``G0 ~ 1/E`` at infinity and ``Im G0 <= 0`` on the support, so the
    density is ``-(n/pi) Im G0``.
    """
    E = np.asarray(E, dtype=float)
    rad = _radius(n, sigma)
    zp = E + 0.0j
    root = np.sqrt(zp - rad) * np.sqrt(zp + rad)
    return (E - root) / (2.0 * sigma**2 * n)


def bulk_density_correction(phi, kappa: float, n: int, exact: bool = False):
    """Mean level density in the angle ``E = 2 sigma sqrt(n) cos(phi)``.

    The unperturbed part is normalized to ``n`` over ``[0, pi]``.  The default
    O(1) coupling term comes from a first-order expansion of the averaged
    resolvent; it integrates to 0 for ``kappa^2 < 1`` and ``kappa^-2 - 1``
    otherwise.

    ``exact=True`` uses instead the O(1) term of
    ``log det(E - M) = log det(E - G) + log(1 - Z G_11(E))`` with ``G_11``
    replaced by its deterministic limit, i.e.
    ``kappa (cos phi - kappa) / (pi (kappa^2 - 2 kappa cos phi + 1))``.  It
    integrates to 0 or to exactly -1 (one state leaves the bulk) and matches
    sampled spectra more closely.
    """
    if kappa * kappa == 1.0:
        raise DomainError("density correction is singular at kappa^2 = 1")
    phi = np.asarray(phi, dtype=float)
    c = np.cos(phi)
    s2 = np.sin(phi) ** 2
    den = math.pi * (kappa * kappa - 2.0 * kappa * c + 1.0)
    if exact:
        return 2.0 * n / math.pi * s2 + kappa * (c - kappa) / den
    return (2.0 * n / math.pi + 2.0 * kappa * (2.0 * c - kappa) / den) * s2


def bulk_density(E, kappa: float, n: int, sigma: float = 1.0, exact: bool = False):
    """:func:`bulk_density_correction` converted to the energy variable."""
    E = np.asarray(E, dtype=float)
    rad = _radius(n, sigma)
    t = np.clip(E / rad, -1.0, 1.0)
    phi = np.arccos(t)
    s = np.sin(phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(s > 0, bulk_density_correction(phi, kappa, n, exact) / (rad * s), 0.0)
    return np.where(np.abs(E) < rad, out, 0.0)


def collective_state(kappa: float, n: int, sigma: float = 1.0) -> CollectiveState:
    if kappa * kappa <= 1.0:
        raise DomainError(f"no collective state for kappa^2 <= 1 (kappa={kappa})")
    inv2 = 1.0 / (kappa * kappa)
    return CollectiveState(e_c=sigma * math.sqrt(n) * (kappa + 1.0 / kappa),
                           z_c=1.0 - inv2,
                           half_width_a=2.0 * sigma * (1.0 - inv2))


def collective_density(E, kappa: float, n: int, sigma: float = 1.0):
    cs = collective_state(kappa, n, sigma)
    a = cs.half_width_a
    d = np.asarray(E, dtype=float) - cs.e_c
    return np.sqrt(np.clip(a * a - d * d, 0.0, None)) / (math.pi * sigma * a)


def l_of_E(E, kappa: float, n: int, sigma: float = 1.0):
    """Mean of ``x = N |Psi_1|^2`` at energy ``E``."""
    E = np.asarray(E, dtype=float)
    den = kappa * kappa + 1.0 - kappa * E / (sigma * math.sqrt(n))
    if np.any(den <= 0):
        bad = E[den <= 0] if E.ndim else E
        raise DomainError(f"l(E) undefined at E={float(np.ravel(bad)[0])!r} for kappa={kappa}")
    return 1.0 / den


def modified_pt_pdf(x, l: float, beta: int):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return ((2.0 * math.pi * x) ** (beta / 2.0 - 1.0) * l ** (-beta / 2.0)
                * np.exp(-beta * x / (2.0 * l)))


def modified_pt_cdf(x, l: float, beta: int):
    x = np.clip(np.asarray(x, dtype=float), 0.0, None)
    if beta == 2:
        return -np.expm1(-x / l)
    return special.gammainc(0.5, x / (2.0 * l))


def gaussian_moment(q: float, beta: int) -> float:
    """``<x^q>`` of the unit-mean Porter-Thomas law."""
    if beta == 1:
        return 2.0**q * math.gamma(q + 0.5) / math.sqrt(math.pi)
    return math.gamma(q + 1.0)


def lagrange_mu(kappa: float, beta: int, n: int, z_c: Optional[float] = None) -> float:
    if z_c is None:
        if kappa * kappa >= 1.0:
            raise DomainError("the z_c-free multiplier needs kappa^2 < 1")
        return beta * n * (kappa * kappa + 1.0) / 2.0
    if not abs(kappa) * (1.0 - z_c) < 1.0 or z_c >= 1.0:
        raise DomainError(f"multiplier needs |kappa|(1 - z_c) < 1 (kappa={kappa}, z_c={z_c})")
    u = 1.0 - z_c
    return beta * n / 2.0 * (kappa * kappa * u + 1.0 / u)


def _window(lo, hi, n, sigma):
    rad = _radius(n, sigma)
    lo, hi = max(lo, -rad), min(hi, rad)
    if not hi > lo:
        raise DomainError(f"empty window [{lo}, {hi}] inside the bulk")
    return lo, hi


def _quad(f, lo, hi, tol=1e-12):
    val, _ = integrate.quad(f, lo, hi, epsabs=tol, epsrel=tol, limit=400)
    return val


def window_count(lo: float, hi: float, n: int, sigma: float = 1.0) -> float:
    lo, hi = _window(lo, hi, n, sigma)
    return float(wigner_count(hi, n, sigma) - wigner_count(lo, n, sigma))


def window_moment(q: float, lo: float, hi: float, kappa: float, beta: int, n: int,
                  sigma: float = 1.0) -> float:
    """``<x^q>`` for states with energies in ``[lo, hi]`` weighted by the semicircle."""
    if q < 0:
        raise DomainError("q must be nonnegative")
    lo, hi = _window(lo, hi, n, sigma)
    l_of_E(np.array([lo, hi]), kappa, n, sigma)  # validity on the window ends
    dn = window_count(lo, hi, n, sigma)
    num = _quad(lambda E: wigner_density(E, n, sigma) * l_of_E(E, kappa, n, sigma) ** q, lo, hi)
    return gaussian_moment(q, beta) * num / dn


def window_pdf(x, lo: float, hi: float, kappa: float, beta: int, n: int,
               sigma: float = 1.0):
    """Semicircle-weighted mixture of modified PT laws over ``[lo, hi]``."""
    lo, hi = _window(lo, hi, n, sigma)
    l_of_E(np.array([lo, hi]), kappa, n, sigma)
    dn = window_count(lo, hi, n, sigma)

    def one(xv):
        if xv < 0 or (xv == 0 and beta == 1):
            raise DomainError(f"window pdf needs x > 0, got {xv}")
        f = lambda E: wigner_density(E, n, sigma) * modified_pt_pdf(xv, l_of_E(E, kappa, n, sigma), beta)
        return _quad(f, lo, hi, tol=1e-13) / dn

    x = np.asarray(x, dtype=float)
    return np.vectorize(one, otypes=[float])(x) if x.ndim else one(float(x))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)
_PHI = 0.5 * math.pi * (_GL_NODES + 1.0)
_PHI_W = 0.5 * math.pi * _GL_WEIGHTS


def fullwindow_factor(x, kappa: float, beta: int):
    """Ratio of the full-bulk mixture to the plain PT law, ``F_beta(x)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("x must be nonnegative")
    if beta == 1:
        c = np.cos(_PHI)
        s2 = np.sin(_PHI) ** 2
        root = np.sqrt(kappa * kappa + 1.0 - 2.0 * kappa * c)
        expo = -0.5 * np.multiply.outer(x, kappa * kappa - 2.0 * kappa * c)
        return (2.0 / math.pi) * (np.exp(expo) * (s2 * root * _PHI_W)).sum(axis=-1)
    # (2/pi) int sin^2 (k^2 + 1 - 2k cos) e^{y cos} = (1 + k^2) 2 I_1(y)/y - 4k I_2(y)/y
    y = 2.0 * kappa * x
    pos = y > 0
    ys = np.where(pos, y, 1.0)
    body = np.where(pos, (1.0 + kappa * kappa) * 2.0 * bessel_ive(1, ys) / ys
                    - 4.0 * kappa * bessel_ive(2, ys) / ys, 1.0 + kappa * kappa)
    return body * np.exp(np.where(pos, y, 0.0) - kappa * kappa * x)


def fullwindow_factor_series(x, kappa: float, beta: int):
    """Small-coupling expansion of ``F_beta`` through ``kappa^4``.

    For ``beta=1`` the truncation error stays below 1e-2 for kappa <= 0.3 and
    x <= 10.  For ``beta=2`` the dropped ``kappa^6 x^6`` terms dominate once
    ``kappa x`` approaches 2, so the series is reliable only for smaller x.
    """
    x = np.asarray(x, dtype=float)
    k2 = kappa * kappa
    if beta == 1:
        return (1.0 + k2 / 8.0 * (x**2 - 6.0 * x + 3.0)
                + k2 * k2 / 192.0 * (x**4 - 16.0 * x**3 + 54.0 * x**2 - 24.0 * x - 3.0))
    return (1.0 + k2 * (x**2 / 2.0 - 2.0 * x + 1.0)
            + k2 * k2 * (x**4 / 12.0 - 5.0 * x**3 / 6.0 + 2.0 * x**2 - x))


# --- modified Bessel functions I_0, I_1, I_2 ------------------------------

_SERIES_CUTOFF = 15.0
_I1_OVERFLOW = 700.0


def _ive_series(nu: int, y: float) -> float:
    h = 0.5 * y
    term = h**nu / math.factorial(nu)
    total = term
    h2 = h * h
    k = 0
    while term > 1e-17 * total or k < 2:
        k += 1
        term *= h2 / (k * (k + nu))
        total += term
    return total * math.exp(-y)


def _ive_asymptotic(nu: int, y: float) -> float:
    # e^-y I_nu(y) ~ (2 pi y)^-1/2 sum_k (-1)^k prod_{j<=k} (4 nu^2 - (2j-1)^2) / (k! (8y)^k)
    mu = 4.0 * nu * nu
    term = 1.0
    total = 1.0
    for k in range(1, 60):
        nxt = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * y)
        if abs(nxt) >= abs(term):
            break
        term = nxt
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return total / math.sqrt(2.0 * math.pi * y)


def bessel_ive(nu: int, y):
    """Exponentially scaled ``e^-y I_nu(y)`` for integer ``nu`` in {0, 1, 2}, ``y >= 0``."""
    if nu not in (0, 1, 2):
        raise ValueError("only orders 0, 1, 2 are implemented")

    def one(v):
        if v < 0:
            raise DomainError("modified Bessel functions are implemented for y >= 0")
        if v == 0:
            return 1.0 if nu == 0 else 0.0
        if v < _SERIES_CUTOFF:
            return _ive_series(nu, v)
        return _ive_asymptotic(nu, v)

    y = np.asarray(y, dtype=float)
    return np.vectorize(one, otypes=[float])(y) if y.ndim else one(float(y))


def bessel_i1e(y):
    return bessel_ive(1, y)


def bessel_i1(y):
    """Modified Bessel function of the first kind, order one.

    Power series below y = 15, large-argument expansion above.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y > _I1_OVERFLOW):
        raise OverflowError(f"I_1(y) overflows for y > {_I1_OVERFLOW:g}")
    return bessel_ive(1, y) * np.exp(y)
