"""Command-line entry point: ``ptrank {sample,theory,verify,report}``.

Configuration is one JSON document with optional sections::

    {
      "seed": 20150731,
      "ensemble": {"n": 1000, "beta": 1, "sigma": 1.0, "kappa": 0.6, "realizations": 50},
      "experiments": {"realizations": 50, "suite_runs": 10, ...},
      "theory": {"formula": "F2", "kappa": 0.3, "beta": 2,
                 "grid": {"start": 0, "stop": 10, "num": 201}}
    }

``ensemble`` takes at most one of ``kappa`` and ``coupling``; the other is
derived and echoed in ``config.json``.  When the ensemble names a coupling,
``verify`` focuses every experiment on that single kappa.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or config error,
3 runtime error.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import re
import sys
import traceback
from pathlib import Path

import numpy as np
from scipy import integrate

from . import harness, theory
from .ensembles import EnsembleParams, dense_spectrum
from .stats import write_csv

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
S_SAMPLE = 0   # stream for cmd_sample; harness experiments use 1..7

SECTIONS = {"seed", "ensemble", "experiments", "theory"}
ENSEMBLE_KEYS = {"n", "beta", "sigma", "kappa", "coupling", "realizations"}
THEORY_KEYS = {"formula", "kappa", "beta", "grid", "window", "n", "sigma"}
FORMULAS = ("wigner", "density_correction", "l_of_E", "window_pdf", "F1", "F2", "series")
# experiment fields that the ensemble section controls
_SHARED = {"n", "beta", "sigma", "seed"}
_FOCUS = {"kappa_grid": list, "histogram_kappas": list, "spacing_kappas": list,
          "component_kappas": list, "collective_kappa": float, "density_kappa": float,
          "secular_kappa": float}


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<config>", line=None):
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")


def _line_of(text: str, key: str):
    """1-based line of the first ``"key":`` in the raw document, if present."""
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


DEFAULT_CONFIG = {
    "seed": harness.ExperimentConfig.seed,
    "ensemble": {"n": 1000, "beta": 1, "sigma": 1.0, "realizations": 50},
    "experiments": {},
    "theory": {"formula": "F2", "kappa": 0.3, "beta": 2,
               "grid": {"start": 0.0, "stop": 10.0, "num": 201}},
}


def _merge(base: dict, extra: dict) -> dict:
    out = json.loads(json.dumps(base))
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _parse_override(item: str):
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value", "--override")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def load_config(path=None, overrides=(), seed=None, kappa=None) -> dict:
    """Merge defaults, the config file, ``--override`` items and flags; validate."""
    text, source = "", "<defaults>"
    doc = {}
    if path is not None:
        source = str(path)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", source) from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", source, exc.lineno) from exc
        if not isinstance(doc, dict):
            raise ConfigError("top level must be an object", source, 1)
    cfg = _merge(DEFAULT_CONFIG, doc)
    for item in overrides:
        keys, value = _parse_override(item)
        node = cfg
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r}: {k!r} is not a section", "--override")
        node[keys[-1]] = value
    if seed is not None:
        cfg["seed"] = seed
    if kappa is not None:
        cfg["ensemble"].pop("coupling", None)
        cfg["ensemble"]["kappa"] = kappa
        cfg["theory"]["kappa"] = kappa
    return validate(cfg, text, source)


def validate(cfg: dict, text: str = "", source: str = "<config>") -> dict:
    def fail(msg, key):
        raise ConfigError(msg, source, _line_of(text, key))

    for k in cfg:
        if k not in SECTIONS:
            fail(f"unknown section {k!r}; expected one of {sorted(SECTIONS)}", k)
    seed = cfg["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        fail(f"seed must be an unsigned 64-bit integer, got {seed!r}", "seed")

    ens = cfg["ensemble"]
    for k in ens:
        if k not in ENSEMBLE_KEYS:
            fail(f"unknown ensemble field {k!r}", k)
    has_k, has_z = ens.get("kappa") is not None, ens.get("coupling") is not None
    if has_k and has_z:
        fail("give exactly one of kappa and coupling", "coupling")
    try:
        n, sigma = int(ens["n"]), float(ens["sigma"])
        coupling = float(ens["coupling"]) if has_z else float(ens.get("kappa") or 0.0) * sigma * math.sqrt(n)
        params = EnsembleParams(n=n, beta=ens["beta"], sigma=sigma, coupling=coupling, seed=seed)
    except (TypeError, ValueError) as exc:
        fail(str(exc), "ensemble")
    if not isinstance(ens["realizations"], int) or ens["realizations"] < 1:
        fail("ensemble.realizations must be a positive integer", "realizations")
    ens["coupling"] = params.coupling
    ens["kappa"] = params.kappa
    ens["focus"] = has_k or has_z

    exp = cfg["experiments"]
    fields = {f.name for f in dataclasses.fields(harness.ExperimentConfig)}
    for k in exp:
        if k in _SHARED:
            fail(f"experiments.{k} is set in the ensemble section", k)
        if k not in fields:
            fail(f"unknown experiment field {k!r}", k)
    try:
        experiment_config(cfg)
    except (TypeError, ValueError) as exc:
        fail(f"experiments: {exc}", "experiments")

    th = cfg["theory"]
    for k in th:
        if k not in THEORY_KEYS:
            fail(f"unknown theory field {k!r}", k)
    if th.get("formula") not in FORMULAS:
        fail(f"theory.formula must be one of {list(FORMULAS)}, got {th.get('formula')!r}", "formula")
    if th.get("beta", 1) not in (1, 2):
        fail("theory.beta must be 1 or 2", "beta")
    try:
        _theory_grid(th)
    except (TypeError, ValueError, KeyError) as exc:
        fail(f"theory.grid: {exc}", "grid")
    return cfg


def experiment_config(cfg: dict) -> harness.ExperimentConfig:
    ens = cfg["ensemble"]
    kw = dict(cfg["experiments"])
    if ens.get("focus"):
        k = float(ens["kappa"])
        for name, kind in _FOCUS.items():
            kw[name] = [k] if kind is list else k
    return harness.ExperimentConfig(n=int(ens["n"]), beta=ens["beta"], sigma=float(ens["sigma"]),
                                    seed=cfg["seed"], **kw)


def _theory_grid(th: dict) -> np.ndarray:
    g = th.get("grid")
    if isinstance(g, list):
        grid = np.asarray(g, dtype=float)
    elif isinstance(g, dict):
        grid = np.linspace(float(g["start"]), float(g["stop"]), int(g["num"]))
    else:
        raise ValueError("grid must be a list of points or {start, stop, num}")
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing with at least 2 points")
    return grid


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _echo(cfg: dict, out: Path) -> None:
    (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


# --- commands ---------------------------------------------------------------------

def cmd_sample(cfg: dict, out: Path, threads: int = 1) -> int:
    ens = cfg["ensemble"]
    params = EnsembleParams(int(ens["n"]), ens["beta"], float(ens["sigma"]), ens["coupling"], cfg["seed"])
    out.mkdir(parents=True, exist_ok=True)
    _echo(cfg, out)
    files = {}

    def one(i):
        pert, unp = dense_spectrum(params, i, S_SAMPLE, unperturbed=True)
        names = (f"perturbed_{i:04d}.csv", f"unperturbed_{i:04d}.csv")
        pert.to_csv(out / names[0])
        unp.to_csv(out / names[1])
        return names

    for names in harness._pmap(one, range(ens["realizations"]), threads):
        for name in names:
            files[name] = _sha256(out / name)
    manifest = {"seed": cfg["seed"], "stream": S_SAMPLE,
                "params": dataclasses.asdict(params) | {"kappa": params.kappa},
                "realizations": ens["realizations"], "files": files}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(files)} spectra to {out}")
    return EXIT_PASS


def theory_curve(cfg: dict) -> theory.TheoryCurve:
    th = cfg["theory"]
    formula = th["formula"]
    grid = _theory_grid(th)
    kappa = float(th.get("kappa", 0.0))
    beta = th.get("beta", 1)
    n = int(th.get("n", cfg["ensemble"]["n"]))
    sigma = float(th.get("sigma", cfg["ensemble"]["sigma"]))
    meta = {"kappa": kappa, "beta": beta, "n": n, "sigma": sigma}
    unit = sigma * math.sqrt(n)

    def integral(f, lo, hi):
        return float(integrate.quad(f, lo, hi, epsabs=1e-11, epsrel=1e-11, limit=400)[0])

    if formula == "wigner":
        values = theory.wigner_density(grid, n, sigma)
        meta["normalization"] = integral(lambda E: theory.wigner_density(E, n, sigma), -2 * unit, 2 * unit)
    elif formula == "density_correction":
        values = theory.bulk_density_correction(grid, kappa, n)
        meta["normalization"] = integral(lambda p: theory.bulk_density_correction(p, kappa, n), 0, math.pi)
    elif formula == "l_of_E":
        values = theory.l_of_E(grid, kappa, n, sigma)
    elif formula == "window_pdf":
        lo, hi = (float(v) * unit for v in th.get("window", [-0.5, 0.5]))
        values = theory.window_pdf(grid, lo, hi, kappa, beta, n, sigma)
        f = lambda x: float(theory.window_pdf(x, lo, hi, kappa, beta, n, sigma))
        meta["window"] = [lo, hi]
        meta["normalization"] = integral(f, 0, 1) + integral(f, 1, np.inf)
    elif formula in ("F1", "F2"):
        beta = 1 if formula == "F1" else 2
        values = theory.fullwindow_factor(grid, kappa, beta)
        meta["beta"] = beta
    else:
        values = theory.fullwindow_factor_series(grid, kappa, beta)
    return theory.TheoryCurve(grid, values, formula, meta)


def cmd_theory(cfg: dict, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    _echo(cfg, out)
    curve = theory_curve(cfg)
    path = out / f"theory_{curve.formula}.csv"
    curve.write(path)
    norm = curve.meta.get("normalization")
    print(f"wrote {path}" + (f" (normalization {norm:.12g})" if norm is not None else ""))
    return EXIT_PASS


def cmd_verify(cfg: dict, out: Path, only=None, threads: int = 1) -> int:
    names = list(only) if only else list(harness.EXPERIMENTS)
    for name in names:
        if name not in harness.EXPERIMENTS:
            raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(harness.EXPERIMENTS)}",
                              "--only")
    ecfg = experiment_config(cfg)
    out.mkdir(parents=True, exist_ok=True)
    _echo(cfg, out)
    summary, timings = {}, {}
    for name in names:
        rep = harness.run_experiment(name, ecfg, threads)
        (out / f"{name}.json").write_text(rep.to_json())
        for table, (header, rows) in rep.tables.items():
            write_csv(out / f"{name}_{table}.csv", header, rows)
        summary[name] = {"passed": rep.passed, "checks": len(rep.checks),
                         "failed": [c.name for c in rep.checks if not c.passed]}
        timings[name] = rep.timings
        print(rep.summary(), flush=True)
    ok = all(s["passed"] for s in summary.values())
    (out / "summary.json").write_text(json.dumps({"passed": ok, "seed": cfg["seed"],
                                                  "experiments": summary}, indent=2, sort_keys=True) + "\n")
    (out / "timings.json").write_text(json.dumps(timings, indent=2, sort_keys=True) + "\n")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_report(out: Path) -> int:
    path = out / "summary.json"
    try:
        summary = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"no readable summary: {exc}", str(path)) from exc
    for name in summary["experiments"]:
        rep = json.loads((out / f"{name}.json").read_text())
        print(f"{name}: {'PASS' if rep['passed'] else 'FAIL'}")
        for c in rep["checks"]:
            mark = "ok " if c["passed"] else "BAD"
            print(f"  [{mark}] {c['name']}: measured={c['measured']:.6g} predicted={c['predicted']:.6g}")
    return EXIT_PASS if summary["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ptrank", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("sample", "write sampled spectra and a manifest"),
                        ("theory", "evaluate a theory curve on a grid"),
                        ("verify", "run the experiment suite"),
                        ("report", "print the results of a previous verify run")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        if name == "report":
            continue
        s.add_argument("--config", type=Path, help="JSON config file")
        s.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        s.add_argument("--kappa", type=float, help="dimensionless coupling; focuses verify on it")
        s.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted config override, value parsed as JSON (repeatable)")
        s.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")
        if name == "verify":
            s.add_argument("--only", help="comma-separated experiment names")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE
    try:
        if args.command == "report":
            return cmd_report(args.out)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1", "--threads")
        cfg = load_config(args.config, args.override, args.seed, args.kappa)
        if args.command == "sample":
            return cmd_sample(cfg, args.out, args.threads)
        if args.command == "theory":
            return cmd_theory(cfg, args.out)
        only = [s for s in args.only.split(",") if s] if args.only else None
        return cmd_verify(cfg, args.out, only, args.threads)
    except (ConfigError, theory.DomainError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - every other failure is a runtime error
        print(json.dumps({"error": type(exc).__name__, "message": str(exc),
                          "traceback": traceback.format_exc(limit=3)}), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
