"""End-to-end Monte Carlo experiments with machine-readable pass/fail reports.

Every experiment draws its matrices from independent streams keyed by
``(master seed, experiment stream, ..., realization)``, runs the dense
pipeline, and compares empirical statistics with the large-N predictions.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from . import rank_one, stats, theory
from .ensembles import (EnsembleParams, UnperturbedSpectrum, apply_rank_one, dense_eigh,
                        dense_spectrum, extract_spectrum, sample_gaussian)
from .stats import EnergyWindow, SampleSet

# experiment streams; never reuse a number for a different purpose
S_FIG1, S_HIST, S_COLLECTIVE, S_DENSITY, S_SECULAR, S_SPACING, S_COMPONENTS = range(1, 8)

DEFAULT_TOLERANCES = {
    "mean_se": 3.0,               # |empirical - predicted| in standard errors
    "center_rel": 0.05,           # small-window l(E) at the window center
    "fit_variance_rel": 0.05,
    "ks_p": 0.01,
    "ks_pass_fraction": 0.90,
    "control_pass_fraction": 0.95,
    "collective_weight_rel": 0.02,
    "collective_count_abs": 1.0,
    "subcritical_weight_n": 20.0,  # z_top < this / N
    "subcritical_fraction": 0.95,
    "density_reduction": 0.30,
    "density_supnorm": 0.03,
    "secular_energy": 1e-8,       # relative to sigma sqrt(N)
    "secular_weight": 1e-8,
    "identity_rel": 1e-8,
    "unitarity": 1e-8,
}


@dataclass
class ExperimentConfig:
    n: int = 1000
    beta: int = 1
    sigma: float = 1.0
    seed: int = 20150731
    realizations: int = 50
    # windows in units of sigma sqrt(N)
    windows: list = field(default_factory=lambda: [[-0.5, 0.5], [0.5, 1.5]])
    kappa_grid: list = field(default_factory=lambda: [0.0, 0.25, 0.6, 1.0, 1.5])
    bins: Optional[int] = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    histogram_kappas: list = field(default_factory=lambda: [0.6, 1.5])
    histogram_realizations: int = 20
    suite_runs: int = 10
    control_runs: int = 20
    collective_kappa: float = 1.5
    subcritical_kappa: float = 0.5
    density_kappa: float = 0.6
    density_grid: int = 2000
    secular_n: int = 64
    secular_seeds: int = 100
    secular_kappa: float = 0.6
    identity_n: int = 1000
    identity_realizations: int = 5
    spacing_kappas: list = field(default_factory=lambda: [0.6, 1.5])
    spacing_realizations: int = 10
    spacing_bulk: float = 0.5     # keep |E| < spacing_bulk * 2 sigma sqrt(N)
    component_kappas: list = field(default_factory=lambda: [0.6, 1.5])
    component_realizations: int = 5

    def __post_init__(self):
        EnsembleParams(self.n, self.beta, self.sigma, 0.0, self.seed)
        for name in ("realizations", "histogram_realizations", "suite_runs", "control_runs",
                     "secular_seeds", "identity_realizations", "spacing_realizations",
                     "component_realizations", "density_grid"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.spacing_realizations < 2:
            raise ValueError("spacing_realizations must be >= 2 (split-half control)")
        for lo, hi in self.windows:
            EnergyWindow(lo, hi)
        tol = dict(DEFAULT_TOLERANCES)
        unknown = set(self.tolerances) - set(tol)
        if unknown:
            raise ValueError(f"unknown tolerance(s): {sorted(unknown)}")
        tol.update(self.tolerances)
        if any(not v > 0 for v in tol.values()):
            raise ValueError("tolerances must be positive")
        self.tolerances = tol

    def params(self, kappa: float = 0.0, beta: Optional[int] = None,
               n: Optional[int] = None) -> EnsembleParams:
        return EnsembleParams.from_kappa(n or self.n, kappa, beta or self.beta, self.sigma, self.seed)

    def energy_windows(self, n: Optional[int] = None):
        return [EnergyWindow.scaled(lo, hi, n or self.n, self.sigma) for lo, hi in self.windows]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Check:
    name: str
    measured: float
    predicted: float
    tolerance: float
    passed: bool


@dataclass
class Report:
    experiment: str
    seed: int
    config: dict
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)   # name -> (header, rows)
    extras: dict = field(default_factory=dict)
    # wall-clock measurements; kept out of the JSON so reports stay byte-stable
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name, measured, predicted, tolerance, passed) -> Check:
        c = Check(name, float(measured), float(predicted), float(tolerance), bool(passed))
        self.checks.append(c)
        return c

    def to_json(self) -> str:
        doc = {
            "experiment": self.experiment,
            "seed": self.seed,
            "passed": self.passed,
            "checks": [asdict(c) for c in self.checks],
            "extras": self.extras,
            "config": self.config,
        }
        return json.dumps(_plain(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def summary(self) -> str:
        lines = [f"{self.experiment}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            mark = "ok " if c.passed else "BAD"
            lines.append(f"  [{mark}] {c.name}: measured={c.measured:.6g} "
                         f"predicted={c.predicted:.6g} tol={c.tolerance:.3g}")
        return "\n".join(lines)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _pmap(fn: Callable, items, threads: int = 1) -> list:
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _dense_batch(params: EnsembleParams, stream, count: int, threads: int):
    return _pmap(lambda i: dense_spectrum(params, i, stream), range(count), threads)


def _eigvals_batch(params: EnsembleParams, stream, count: int, threads: int, both=False):
    def one(i):
        g = sample_gaussian(params, i, stream)
        E = dense_eigh(apply_rank_one(g, params.coupling), eigvals_only=True)
        return (E, dense_eigh(g, eigvals_only=True)) if both else E
    return _pmap(one, range(count), threads)


def _label(w: EnergyWindow, cfg: ExperimentConfig) -> str:
    u = cfg.sigma * math.sqrt(cfg.n)
    return f"[{w.lo / u:g},{w.hi / u:g}]sqrtN"


# --- figure 1: window means -------------------------------------------------

def exp_fig1(cfg: ExperimentConfig, threads: int = 1) -> Report:
    """Window means of ``N |Psi_1|^2`` against the window-averaged and central l(E)."""
    rep = Report("exp_fig1", cfg.seed, cfg.to_dict())
    tol = cfg.tolerances
    rows = []
    windows = cfg.energy_windows()
    for ki, kappa in enumerate(cfg.kappa_grid):
        params = cfg.params(kappa)
        spectra = _dense_batch(params, (S_FIG1, ki), cfg.realizations, threads)
        for wi, w in enumerate(windows):
            s = stats.window_select(spectra, w, "width", exclude_top=kappa * kappa > 1)
            mean, se = stats.empirical_moment(s, 1)
            pred = theory.window_moment(1, w.lo, w.hi, kappa, cfg.beta, cfg.n, cfg.sigma)
            center = float(theory.l_of_E(w.center, kappa, cfg.n, cfg.sigma))
            tag = f"kappa={kappa:g} window={_label(w, cfg)}"
            rep.check(f"{tag} mean vs window average", mean, pred, tol["mean_se"] * se,
                      abs(mean - pred) <= tol["mean_se"] * se)
            if wi == 0:
                rep.check(f"{tag} mean vs l(center)", mean, center, tol["center_rel"],
                          abs(mean - center) <= tol["center_rel"] * center)
            rows.append((kappa, w.lo, w.hi, s.count, mean, se, pred, center))
    rep.tables["means"] = (("kappa", "window_lo", "window_hi", "count", "mean", "stderr",
                            "window_average", "l_center"), rows)
    return rep


# --- figures 2-4: amplitude histograms -----------------------------------------

def _hist_cases(cfg):
    cases = [(1, k, ("amplitude",)) for k in cfg.histogram_kappas]
    cases.append((2, cfg.histogram_kappas[0], ("real", "imag")))
    return cases


def exp_histograms(cfg: ExperimentConfig, threads: int = 1) -> Report:
    """Amplitude distributions in each window against N(0, l(E_center))."""
    rep = Report("exp_histograms", cfg.seed, cfg.to_dict())
    tol = cfg.tolerances
    windows = cfg.energy_windows()
    ks_rows, hist_rows, fit_rows = [], [], []
    cases = [(ci, *c, cfg.suite_runs) for ci, c in enumerate(_hist_cases(cfg))]
    cases.append((len(cases), 1, 0.0, ("amplitude",), cfg.control_runs))
    for ci, beta, kappa, parts, runs in cases:
        params = cfg.params(kappa, beta=beta)
        pooled = {(wi, p): [] for wi in range(len(windows)) for p in parts}
        passes = {key: 0 for key in pooled}
        for run in range(runs):
            spectra = _dense_batch(params, (S_HIST, ci, run), cfg.histogram_realizations, threads)
            for wi, w in enumerate(windows):
                lc = float(theory.l_of_E(w.center, kappa, cfg.n, cfg.sigma))
                for p in parts:
                    s = stats.window_select(spectra, w, p, exclude_top=kappa * kappa > 1)
                    d, pv = stats.ks_statistic(s, stats.normal_cdf(lc))
                    passes[(wi, p)] += pv > tol["ks_p"]
                    pooled[(wi, p)].append(s.values)
                    ks_rows.append((beta, kappa, w.lo, w.hi, p, run, s.count, d, pv))
        need = tol["control_pass_fraction"] if kappa == 0 else tol["ks_pass_fraction"]
        fits = {}
        for (wi, p), chunks in pooled.items():
            w = windows[wi]
            lc = float(theory.l_of_E(w.center, kappa, cfg.n, cfg.sigma))
            s = SampleSet(np.concatenate(chunks))
            mean, var = stats.gaussian_fit(s)
            vse = stats.variance_stderr(s)
            fits[(wi, p)] = (var, vse)
            tag = f"beta={beta} kappa={kappa:g} window={_label(w, cfg)} part={p}"
            frac = passes[(wi, p)] / runs
            rep.check(f"{tag} KS pass fraction", frac, need, tol["ks_p"], frac >= need)
            if kappa == 0:
                rep.check(f"{tag} fitted variance", var, 1.0, tol["mean_se"] * vse,
                          abs(var - 1.0) <= tol["mean_se"] * vse)
            else:
                rep.check(f"{tag} fitted variance vs l(center)", var, lc, tol["fit_variance_rel"],
                          abs(var - lc) <= tol["fit_variance_rel"] * lc)
            avg = theory.window_moment(1, w.lo, w.hi, kappa, 1, cfg.n, cfg.sigma)
            fit_rows.append((beta, kappa, w.lo, w.hi, p, s.count, mean, var, vse, lc, avg))
            h = stats.histogram(s, cfg.bins)
            hist_rows.extend((beta, kappa, w.lo, w.hi, p, lo, hi, dens) for lo, hi, dens in h.rows())
        if parts == ("real", "imag"):
            for wi, w in enumerate(windows):
                (vr, sr), (vi, si) = fits[(wi, "real")], fits[(wi, "imag")]
                joint = math.hypot(sr, si)
                rep.check(f"beta=2 kappa={kappa:g} window={_label(w, cfg)} real/imag variance",
                          vr - vi, 0.0, tol["mean_se"] * joint, abs(vr - vi) <= tol["mean_se"] * joint)
    rep.tables["ks"] = (("beta", "kappa", "window_lo", "window_hi", "part", "run", "count", "D", "p"),
                        ks_rows)
    rep.tables["fits"] = (("beta", "kappa", "window_lo", "window_hi", "part", "count", "mean",
                           "variance", "variance_stderr", "l_center", "window_average"), fit_rows)
    rep.tables["histograms"] = (("beta", "kappa", "window_lo", "window_hi", "part", "bin_lo",
                                 "bin_hi", "density"), hist_rows)
    rep.extras["histogram_realizations"] = cfg.histogram_realizations
    rep.extras["bins"] = cfg.bins if cfg.bins is not None else "freedman-diaconis"
    return rep


# --- collective state ----------------------------------------------------------

def exp_collective(cfg: ExperimentConfig, threads: int = 1) -> Report:
    kappa = cfg.collective_kappa
    cs = theory.collective_state(kappa, cfg.n, cfg.sigma)   # raises for kappa^2 <= 1
    rep = Report("exp_collective", cfg.seed, cfg.to_dict())
    tol = cfg.tolerances
    spectra = _dense_batch(cfg.params(kappa), (S_COLLECTIVE, 0), cfg.realizations, threads)
    top = np.array([int(np.argmax(s.E)) for s in spectra])
    e_top = np.array([s.E[i] for s, i in zip(spectra, top)])
    z_top = np.array([s.z[i] for s, i in zip(spectra, top)])
    edge = 2.0 * cfg.sigma * math.sqrt(cfg.n)
    threshold = 0.5 * (edge + cs.e_c)
    bulk = np.array([np.sum(s.E < threshold) for s in spectra])

    rep.check("mean top-state weight", z_top.mean(), cs.z_c, tol["collective_weight_rel"],
              abs(z_top.mean() - cs.z_c) <= tol["collective_weight_rel"] * cs.z_c)
    rep.check("mean top-state energy", e_top.mean(), cs.e_c, cs.half_width_a,
              abs(e_top.mean() - cs.e_c) <= cs.half_width_a)
    rep.check("top state separated from the bulk edge", e_top.min() - edge, 0.0, 0.0,
              e_top.min() > edge)
    expected = cfg.n - 1 + kappa**-2
    rep.check("bulk state count", bulk.mean(), expected, tol["collective_count_abs"],
              abs(bulk.mean() - expected) <= tol["collective_count_abs"])

    sub = cfg.subcritical_kappa
    sub_spectra = _dense_batch(cfg.params(sub), (S_COLLECTIVE, 1), cfg.realizations, threads)
    zsub = np.array([s.z[int(np.argmax(s.E))] for s in sub_spectra])
    frac = float(np.mean(zsub < tol["subcritical_weight_n"] / cfg.n))
    rep.check(f"kappa={sub:g} top-state weight below {tol['subcritical_weight_n']:g}/N",
              frac, tol["subcritical_fraction"], tol["subcritical_weight_n"],
              frac >= tol["subcritical_fraction"])

    rep.extras.update({"e_c": cs.e_c, "z_c": cs.z_c, "half_width_a": cs.half_width_a,
                       "top_energy_std": float(e_top.std(ddof=1)),
                       "collective_density_std": cs.half_width_a / 2.0,
                       "top_weight_stderr": float(z_top.std(ddof=1) / math.sqrt(len(z_top)))})
    rep.tables["top_states"] = (("realization", "E_top", "z_top", "bulk_count"),
                                list(zip(range(len(e_top)), e_top, z_top, bulk)))
    return rep


# --- mean level density ----------------------------------------------------------

def _correction_count(xs, kappa, n, sigma, exact=False):
    """Integrated O(1) density correction from the lower edge up to each x.

    Integrates in the angle ``E = 2 sigma sqrt(n) cos(phi)`` where the
    integrand is smooth at the edges.
    """
    rad = 2.0 * sigma * math.sqrt(n)
    f = lambda p: float(theory.bulk_density_correction(p, kappa, n, exact)
                        - 2.0 * n / math.pi * math.sin(p) ** 2)
    phis = np.concatenate([[math.pi], np.arccos(np.clip(np.asarray(xs) / rad, -1.0, 1.0))])
    pieces = [integrate.quad(f, lo, hi, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
              for hi, lo in zip(phis[:-1], phis[1:])]
    return np.cumsum(pieces)


def _counting(values, xs):
    return np.searchsorted(np.sort(values), xs, side="right")


def exp_density(cfg: ExperimentConfig, threads: int = 1) -> Report:
    """Level density of M against the semicircle with and without the O(1) correction.

    The comparison uses level counts ``#(E <= x)`` averaged over realizations.
    The paired estimator subtracts the count of the unperturbed spectrum of
    the same matrix, whose mean is the semicircle count: the difference is
    bounded by one level per realization, which removes the O(sqrt(log N))
    count fluctuations shared by both spectra.
    """
    rep = Report("exp_density", cfg.seed, cfg.to_dict())
    tol = cfg.tolerances
    kappa = cfg.density_kappa
    rad = 2.0 * cfg.sigma * math.sqrt(cfg.n)
    params = cfg.params(kappa)
    pairs = _eigvals_batch(params, (S_DENSITY, 0), cfg.realizations, threads, both=True)
    xs = np.linspace(-rad, rad, cfg.density_grid + 1)[1:-1]
    dx = xs[1] - xs[0]
    delta = _correction_count(xs, kappa, cfg.n, cfg.sigma)
    paired = np.mean([_counting(E, xs) - _counting(e, xs) for E, e in pairs], axis=0)
    raw = np.mean([_counting(E, xs) for E, _ in pairs], axis=0) - theory.wigner_count(xs, cfg.n, cfg.sigma)
    dev_w = float(np.sum(np.abs(paired)) * dx)
    dev_c = float(np.sum(np.abs(paired - delta)) * dx)
    reduction = 1.0 - dev_c / dev_w
    rep.check(f"kappa={kappa:g} deviation reduction by the density correction", reduction,
              tol["density_reduction"], tol["density_reduction"], reduction >= tol["density_reduction"])
    exact = _correction_count(xs, kappa, cfg.n, cfg.sigma, exact=True)
    dev_x = float(np.sum(np.abs(paired - exact)) * dx)
    rep.extras.update({
        "paired_deviation_wigner": dev_w, "paired_deviation_corrected": dev_c,
        "paired_deviation_exact_correction": dev_x, "reduction_exact_correction": 1.0 - dev_x / dev_w,
        "raw_deviation_wigner": float(np.sum(np.abs(raw)) * dx),
        "raw_deviation_corrected": float(np.sum(np.abs(raw - delta)) * dx),
    })
    step = max(1, len(xs) // 200)
    rep.tables["counts"] = (("E", "paired_count_shift", "predicted_shift", "exact_shift", "raw_count_shift"),
                            list(zip(xs[::step], paired[::step], delta[::step], exact[::step], raw[::step])))

    # the unperturbed spectra are the kappa = 0 control
    bins = cfg.bins or 40
    edges = np.linspace(-rad, rad, bins + 1)
    width = np.diff(edges)
    h0 = np.histogram(np.concatenate([e for _, e in pairs]), edges)[0] / (len(pairs) * width)
    ref = np.diff(theory.wigner_count(edges, cfg.n, cfg.sigma)) / width
    peak = float(theory.wigner_density(0.0, cfg.n, cfg.sigma))
    sup = float(np.max(np.abs(h0 - ref)) / peak)
    rep.check("kappa=0 histogram vs semicircle (sup-norm / peak)", sup, 0.0, tol["density_supnorm"],
              sup < tol["density_supnorm"])
    rep.tables["histogram_kappa0"] = (("bin_lo", "bin_hi", "density", "semicircle"),
                                      list(zip(edges[:-1], edges[1:], h0, ref)))

    kc = cfg.collective_kappa
    if kc * kc > 1:
        cs = theory.collective_state(kc, cfg.n, cfg.sigma)
        split = _eigvals_batch(cfg.params(kc), (S_DENSITY, 0), cfg.realizations, threads)
        threshold = 0.5 * (rad + cs.e_c)
        bulk = np.mean([np.sum(E < threshold) for E in split])
        expected = cfg.n - 1 + kc**-2
        rep.check(f"kappa={kc:g} bulk level count", bulk, expected, tol["collective_count_abs"],
                  abs(bulk - expected) <= tol["collective_count_abs"])
        rep.extras["collective_count_per_realization"] = float(cfg.n - bulk)
    return rep


# --- secular solver against dense diagonalization ---------------------------------

def exp_secular_vs_dense(cfg: ExperimentConfig, threads: int = 1) -> Report:
    rep = Report("exp_secular_vs_dense", cfg.seed, cfg.to_dict())
    tol = cfg.tolerances
    params = cfg.params(cfg.secular_kappa, n=cfg.secular_n)
    scale = params.sigma * math.sqrt(params.n)

    def one(i):
        g = sample_gaussian(params, i, (S_SECULAR, 0))
        u = extract_spectrum(*dense_eigh(g), perturbed=False)
        t0 = time.perf_counter()
        sec = rank_one.perturb(u, params.coupling)
        t1 = time.perf_counter()
        den = extract_spectrum(*dense_eigh(apply_rank_one(g, params.coupling)))
        t2 = time.perf_counter()
        ov = rank_one.overlap_coefficients(u.e, sec.E)
        unit = rank_one.unitarity_defect(rank_one.overlap_matrix(u.e, sec.E, ov))
        back = rank_one.perturb(UnperturbedSpectrum(sec.E, sec.z), -params.coupling)
        return (np.max(np.abs(sec.E - den.E)) / scale, np.max(np.abs(sec.z - den.z)), unit,
                np.max(np.abs(back.E - u.e)) / scale, np.array_equal(rank_one.secular_solve(u.e, u.r, 0.0), u.e),
                t1 - t0, t2 - t1)

    res = _pmap(one, range(cfg.secular_seeds), threads)
    dE = max(r[0] for r in res)
    dz = max(r[1] for r in res)
    unit = max(r[2] for r in res)
    inv = max(r[3] for r in res)
    t_secular = sum(r[5] for r in res)
    t_dense = sum(r[6] for r in res)
    rep.check(f"N={params.n} max |E_secular - E_dense| / (sigma sqrt N)", dE, 0.0,
              tol["secular_energy"], dE <= tol["secular_energy"])
    rep.check(f"N={params.n} max |z_secular - z_dense|", dz, 0.0, tol["secular_weight"],
              dz <= tol["secular_weight"])
    rep.check(f"N={params.n} overlap matrix unitarity", unit, 0.0, tol["unitarity"],
              unit <= tol["unitarity"])
    rep.check(f"N={params.n} Z -> -Z round trip recovers e", inv, 0.0, tol["secular_energy"],
              inv <= tol["secular_energy"])
    rep.check("Z = 0 secular path is the identity", float(not all(r[4] for r in res)), 0.0, 0.0,
              all(r[4] for r in res))

    big = cfg.params(cfg.secular_kappa, n=cfg.identity_n)

    def ident(i):
        pert, unp = dense_spectrum(big, i, (S_SECULAR, 1), unperturbed=True)
        dense = rank_one.trace_identities(unp.e, pert.E, pert.z, big.coupling)
        sec = rank_one.perturb(unp, big.coupling)
        secular = rank_one.trace_identities(unp.e, sec.E, sec.z, big.coupling)
        return dense, secular

    worst = {"shift": 0.0, "square": 0.0}
    for pair in _pmap(ident, range(cfg.identity_realizations), threads):
        for r in pair:
            worst["shift"] = max(worst["shift"], r.relative_shift)
            worst["square"] = max(worst["square"], r.relative_square)
    rep.check(f"N={big.n} sum(E - e) = Z (relative)", worst["shift"], 0.0, tol["identity_rel"],
              worst["shift"] <= tol["identity_rel"])
    rep.check(f"N={big.n} trace-square identity (relative)", worst["square"], 0.0, tol["identity_rel"],
              worst["square"] <= tol["identity_rel"])
    rep.timings.update({"secular_seconds": t_secular, "dense_seconds": t_dense,
                        "dense_over_secular": t_dense / t_secular if t_secular else float("inf")})
    return rep


# --- nearest-neighbour spacings ----------------------------------------------------

def _unfolded_spacings(E, cfg):
    rad = 2.0 * cfg.sigma * math.sqrt(cfg.n)
    keep = np.sort(E[np.abs(E) < cfg.spacing_bulk * rad])
    return np.diff(theory.wigner_count(keep, cfg.n, cfg.sigma))


def exp_spacing(cfg: ExperimentConfig, threads: int = 1) -> Report:
    rep = Report("exp_spacing", cfg.seed, cfg.to_dict())
    tol = cfg.tolerances
    runs = max(cfg.suite_runs, cfg.control_runs)
    ref_params = cfg.params(0.0)
    half = cfg.spacing_realizations // 2
    passes = {k: 0 for k in cfg.spacing_kappas}
    control = 0
    rows = []
    for run in range(runs):
        ref = _eigvals_batch(ref_params, (S_SPACING, 0, run), cfg.spacing_realizations, threads)
        ref_s = [_unfolded_spacings(E, cfg) for E in ref]
        _, pc = stats.ks_2samp(np.concatenate(ref_s[:half]), np.concatenate(ref_s[half:]))
        if run < cfg.control_runs:
            control += pc > tol["ks_p"]
            rows.append((0.0, run, pc))
        if run >= cfg.suite_runs:
            continue
        pooled_ref = np.concatenate(ref_s)
        for ki, kappa in enumerate(cfg.spacing_kappas):
            pert = _eigvals_batch(cfg.params(kappa), (S_SPACING, ki + 1, run),
                                  cfg.spacing_realizations, threads)
            sp = np.concatenate([_unfolded_spacings(E, cfg) for E in pert])
            _, p = stats.ks_2samp(sp, pooled_ref)
            passes[kappa] += p > tol["ks_p"]
            rows.append((kappa, run, p))
    frac = control / cfg.control_runs
    rep.check("kappa=0 split-half spacing KS pass fraction", frac, tol["control_pass_fraction"],
              tol["ks_p"], frac >= tol["control_pass_fraction"])
    for kappa in cfg.spacing_kappas:
        frac = passes[kappa] / cfg.suite_runs
        rep.check(f"kappa={kappa:g} vs kappa=0 spacing KS pass fraction", frac,
                  tol["ks_pass_fraction"], tol["ks_p"], frac >= tol["ks_pass_fraction"])
    rep.tables["ks"] = (("kappa", "run", "p"), rows)
    return rep


# --- other eigenvector components ---------------------------------------------------

def exp_other_components(cfg: ExperimentConfig, threads: int = 1) -> Report:
    """``N |Psi_j|^2`` for a component other than the coupled one stays Porter-Thomas."""
    rep = Report("exp_other_components", cfg.seed, cfg.to_dict())
    tol = cfg.tolerances
    cases = [(k, 1) for k in cfg.component_kappas] + [(0.0, 0)]
    rows = []
    for ci, (kappa, j) in enumerate(cases):
        params = cfg.params(kappa)

        def one(i):
            g = sample_gaussian(params, i, (S_COMPONENTS, ci, run))
            E, v = dense_eigh(apply_rank_one(g, params.coupling))
            x = params.n * np.abs(v[j, :]) ** 2
            if kappa * kappa > 1:
                x = x[:-1]   # drop the collective state (highest energy)
            return x

        passes = 0
        for run in range(cfg.suite_runs):
            x = np.concatenate(_pmap(one, range(cfg.component_realizations), threads))
            cdf = lambda t: theory.modified_pt_cdf(t, 1.0, params.beta)
            _, p = stats.ks_statistic(SampleSet(x), cdf)
            passes += p > tol["ks_p"]
            rows.append((kappa, j + 1, run, x.size, p))
        frac = passes / cfg.suite_runs
        rep.check(f"kappa={kappa:g} component j={j + 1} KS vs Porter-Thomas pass fraction", frac,
                  tol["ks_pass_fraction"], tol["ks_p"], frac >= tol["ks_pass_fraction"])
    rep.tables["ks"] = (("kappa", "component", "run", "count", "p"), rows)
    return rep


EXPERIMENTS = {
    "exp_secular_vs_dense": exp_secular_vs_dense,
    "exp_fig1": exp_fig1,
    "exp_histograms": exp_histograms,
    "exp_collective": exp_collective,
    "exp_density": exp_density,
    "exp_spacing": exp_spacing,
    "exp_other_components": exp_other_components,
}


def run_experiment(name: str, cfg: ExperimentConfig, threads: int = 1) -> Report:
    if name not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    t0 = time.perf_counter()
    rep = EXPERIMENTS[name](cfg, threads)
    rep.timings["total_seconds"] = time.perf_counter() - t0
    return rep
