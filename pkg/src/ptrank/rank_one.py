"""Eigen-update for ``M = G + Z e_1 e_1^T`` without re-diagonalization.

Given the spectrum ``e`` of G and the weights ``r = |Phi_1|^2`` the perturbed
eigenvalues are the roots of ``Z sum_b r_b / (E - e_b) = 1``.  The weights of
the perturbed states and the overlaps between the two eigenbases then follow
from ratios of products over ``E - e`` differences, which are evaluated as sums
of logarithms with a separate sign count so that N ~ 1000 does not overflow.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensembles import PerturbedSpectrum, UnperturbedSpectrum

DEFLATION_TOL = 1e-14   # relative to max(r)
MERGE_TOL = 1e-13       # relative to the spectral scale
ROOT_RTOL = 1e-14
MAX_ITER = 200


class SecularError(ArithmeticError):
    """Root bracketing failed or the inputs break interlacing."""


class InterlacingError(SecularError):
    pass


@dataclass(frozen=True)
class OverlapData:
    a_sq: np.ndarray
    b_sq: np.ndarray


@dataclass(frozen=True)
class TraceResiduals:
    shift: float      # sum(E - e) - Z
    square: float     # sum e^2 - (sum E^2 - 2 Z sum E z + Z^2)
    scale_shift: float
    scale_square: float

    @property
    def relative_shift(self) -> float:
        return abs(self.shift) / self.scale_shift if self.scale_shift else abs(self.shift)

    @property
    def relative_square(self) -> float:
        return abs(self.square) / self.scale_square if self.scale_square else abs(self.square)

    def to_dict(self) -> dict:
        return {"shift": self.shift, "square": self.square,
                "relative_shift": self.relative_shift, "relative_square": self.relative_square}


def _deflate(e: np.ndarray, r: np.ndarray, coupling: float) -> np.ndarray:
    """Weights with negligible or merged poles zeroed out."""
    w = np.where(r < DEFLATION_TOL * r.max(), 0.0, r) if r.max() > 0 else np.zeros_like(r)
    scale = max(float(np.max(np.abs(e))), abs(coupling) * float(w.sum()), np.finfo(float).tiny)
    prev = -1
    for j in np.flatnonzero(w):
        if prev >= 0 and e[j] - e[prev] < MERGE_TOL * scale:
            # rotate the pair so that one pole carries all of the weight
            w[j] += w[prev]
            w[prev] = 0.0
        prev = j
    return w


def _solve_positive(d: np.ndarray, w: np.ndarray, coupling: float):
    """Roots of ``sum w/(x - d) = 1/Z`` for Z > 0 and strictly ascending poles.

    Returns ``(origin, tau)`` with root = origin + tau, where origin is the pole
    nearest to the root (or the top pole for the last root) so that the small
    differences ``root - d_j = tau - (d_j - origin)`` keep full relative accuracy.
    """
    m = len(d)
    inv_z = 1.0 / coupling
    upper = d[-1] + coupling * w.sum()
    lo = d.copy()
    hi = np.append(d[1:], upper)

    mid = 0.5 * (lo + hi)
    f_mid = (w[None, :] / (mid[:, None] - d[None, :])).sum(axis=1) - inv_z
    to_hi = f_mid > 0
    to_hi[-1] = False
    origin_idx = np.arange(m) + to_hi
    origin = d[origin_idx]
    delta = d[None, :] - origin[:, None]
    delta[np.arange(m), origin_idx] = 0.0

    # bracket in the shifted variable; root sits on the origin's side of mid
    a = np.where(to_hi, mid - hi, 0.0)
    b = np.where(to_hi, 0.0, mid - lo)
    a[-1], b[-1] = 0.0, upper - d[-1]
    tau = 0.5 * (a + b)
    active = np.ones(m, dtype=bool)

    for _ in range(MAX_ITER):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        t = tau[idx]
        diff = t[:, None] - delta[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            q = w[None, :] / diff
            f = q.sum(axis=1) - inv_z
            fp = -(q / diff).sum(axis=1)
        exact = f == 0
        pos = f > 0
        a[idx] = np.where(pos, t, a[idx])
        b[idx] = np.where(pos, b[idx], t)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = t - f / fp
        ai, bi = a[idx], b[idx]
        ok = np.isfinite(newton) & (newton > ai) & (newton < bi)
        t_new = np.where(ok, newton, 0.5 * (ai + bi))
        t_new = np.where(exact, t, t_new)
        tau[idx] = t_new
        width = bi - ai
        size = np.maximum(np.abs(ai), np.abs(bi))
        step = np.abs(t_new - t)
        done = exact | (width <= ROOT_RTOL * size) | (step <= 0.25 * ROOT_RTOL * np.abs(t_new))
        active[idx[done]] = False
    else:
        bad = np.flatnonzero(active)
        raise SecularError(f"secular iteration did not converge on intervals {bad.tolist()}")
    if np.any(tau < a) or np.any(tau > b):
        raise SecularError("root escaped its bracket in interval "
                           f"{int(np.flatnonzero((tau < a) | (tau > b))[0])}")
    return origin, tau, delta


def _check_inputs(e, r):
    e = np.asarray(e, dtype=float)
    r = np.asarray(r, dtype=float)
    if e.shape != r.shape or e.ndim != 1:
        raise ValueError("e and r must be 1-d arrays of equal length")
    if np.any(np.diff(e) < 0):
        raise ValueError("e must be ascending")
    if np.any(r < 0):
        raise ValueError("weights must be nonnegative")
    return e, r


def _solve(e, r, coupling):
    """Full solve for Z > 0: sorted E and z computed from accurate gaps."""
    w = _deflate(e, r, coupling)
    act = np.flatnonzero(w)
    if act.size == 0:
        return e.copy(), np.zeros_like(e)
    origin, tau, delta = _solve_positive(e[act], w[act], coupling)
    roots = origin + tau
    # z = prod_g (E - e_g) / (Z prod_{g != a} (E - E_g)) over active poles/roots;
    # deflated pairs cancel exactly because their root equals their pole
    gaps = tau[:, None] - delta
    rdiff = roots[:, None] - roots[None, :]
    np.fill_diagonal(rdiff, 1.0)
    with np.errstate(divide="ignore"):
        logz = (np.log(np.abs(gaps)).sum(axis=1) - np.log(np.abs(rdiff)).sum(axis=1)
                - np.log(coupling))
    neg = (gaps < 0).sum(axis=1) + (rdiff < 0).sum(axis=1)
    z_roots = np.where(neg % 2 == 0, 1.0, -1.0) * np.exp(logz)
    if np.any(z_roots < -1e-12):
        raise InterlacingError("negative perturbed weight; interlacing broken")
    z_roots = np.clip(z_roots, 0.0, None)

    pinned = np.setdiff1d(np.arange(len(e)), act)
    E = np.concatenate([roots, e[pinned]])
    z = np.concatenate([z_roots, np.zeros(pinned.size)])
    order = np.argsort(E, kind="stable")
    return E[order], z[order]


def secular_solve(e, r, coupling: float) -> np.ndarray:
    """Perturbed eigenvalues from ``(e, r, Z)``; ``Z == 0`` returns ``e``."""
    e, r = _check_inputs(e, r)
    if coupling == 0:
        return e.copy()
    if coupling < 0:
        return -_solve(-e[::-1], r[::-1], -coupling)[0][::-1]
    return _solve(e, r, coupling)[0]


def perturb(spec: UnperturbedSpectrum, coupling: float) -> PerturbedSpectrum:
    """Perturbed spectrum ``(E, z)`` via the secular path."""
    e, r = _check_inputs(spec.e, spec.r)
    if coupling == 0:
        return PerturbedSpectrum(e.copy(), r.copy())
    if coupling < 0:
        E, z = _solve(-e[::-1], r[::-1], -coupling)
        return PerturbedSpectrum(-E[::-1], z[::-1].copy())
    return PerturbedSpectrum(*_solve(e, r, coupling))


def _log_ratio(num: np.ndarray, den: np.ndarray):
    """Row-wise ``prod(num) / prod(den)`` as (sign, log magnitude)."""
    with np.errstate(divide="ignore"):
        logv = np.log(np.abs(num)).sum(axis=1) - np.log(np.abs(den)).sum(axis=1)
    neg = (num < 0).sum(axis=1) + (den < 0).sum(axis=1)
    return np.where(neg % 2 == 0, 1.0, -1.0), logv


def _offdiag_diff(x: np.ndarray, reverse: bool = False) -> np.ndarray:
    """``x_a - x_g`` (or ``x_g - x_a``) with a neutral 1 on the diagonal."""
    d = x[None, :] - x[:, None] if reverse else x[:, None] - x[None, :]
    np.fill_diagonal(d, 1.0)
    return d


def perturbed_weights(e, E, coupling: float) -> np.ndarray:
    """``z_a = prod_g (E_a - e_g) / (Z prod_{g != a} (E_a - E_g))``."""
    e = np.asarray(e, dtype=float)
    E = np.asarray(E, dtype=float)
    if coupling == 0:
        raise ValueError("weights are undefined for Z = 0")
    sign, logv = _log_ratio(E[:, None] - e[None, :], _offdiag_diff(E))
    z = sign * np.sign(coupling) * np.exp(logv - np.log(abs(coupling)))
    if np.any(z < -1e-12):
        bad = int(np.argmin(z))
        raise InterlacingError(f"negative weight z[{bad}] = {z[bad]:.3e}; interlacing broken")
    return np.clip(z, 0.0, None)


def overlap_coefficients(e, E) -> OverlapData:
    """``|b|^2`` and ``|a|^2`` from the two spectra alone.

    For ``Z < 0`` both carry the sign of Z (``b^2 = Z r``, ``a^2 = Z z``).
    """
    e = np.asarray(e, dtype=float)
    E = np.asarray(E, dtype=float)
    sb, lb = _log_ratio(E[None, :] - e[:, None], _offdiag_diff(e, reverse=True))
    sa, la = _log_ratio(e[None, :] - E[:, None], _offdiag_diff(E, reverse=True))
    return OverlapData(a_sq=-sa * np.exp(la), b_sq=sb * np.exp(lb))


def overlap_matrix(e, E, overlaps: OverlapData) -> np.ndarray:
    """``C_ab = a_a b_b / (E_a - e_b)`` in the gauge where all ``a, b >= 0``.

    Row ``a`` holds the expansion of the perturbed state ``a`` over the
    unperturbed basis.  Deflated states (``E_a == e_a``) map to themselves.
    """
    e = np.asarray(e, dtype=float)
    E = np.asarray(E, dtype=float)
    if len(e) > 1024:
        raise ValueError("overlap_matrix is dense; N must be <= 1024")
    a = np.sqrt(np.abs(overlaps.a_sq))
    b = np.sqrt(np.abs(overlaps.b_sq))
    den = E[:, None] - e[None, :]
    pinned = den == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.outer(a, b) / den
    c[pinned] = 1.0
    return c


def unitarity_defect(c: np.ndarray) -> float:
    return float(np.max(np.abs(c @ c.conj().T - np.eye(len(c)))))


def trace_identities(e, E, z, coupling: float) -> TraceResiduals:
    e = np.asarray(e, dtype=float)
    E = np.asarray(E, dtype=float)
    z = np.asarray(z, dtype=float)
    shift = float(np.sum(E - e) - coupling)
    lhs = float(np.sum(e * e))
    rhs = float(np.sum(E * E) - 2.0 * coupling * np.sum(E * z) + coupling * coupling)
    return TraceResiduals(shift=shift, square=lhs - rhs,
                          scale_shift=abs(coupling), scale_square=lhs)
