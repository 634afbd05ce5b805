"""Run one or more harness experiments and write their JSON reports and CSV tables.

    python3 scripts/run_experiment.py exp_fig1 exp_collective --out out/figs --n 1000
"""
import argparse
from pathlib import Path

from ptrank import harness
from ptrank.stats import write_csv


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("experiments", nargs="+", choices=sorted(harness.EXPERIMENTS))
    p.add_argument("--out", type=Path, default=Path("out/experiments"))
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--beta", type=int, default=1, choices=(1, 2))
    p.add_argument("--realizations", type=int, default=50)
    p.add_argument("--seed", type=int, default=harness.ExperimentConfig.seed)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()

    cfg = harness.ExperimentConfig(n=args.n, beta=args.beta, realizations=args.realizations, seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    for name in args.experiments:
        rep = harness.run_experiment(name, cfg, args.threads)
        (args.out / f"{name}.json").write_text(rep.to_json())
        for table, (header, rows) in rep.tables.items():
            write_csv(args.out / f"{name}_{table}.csv", header, rows)
        print(rep.summary())
        print(f"  ({rep.timings['total_seconds']:.1f}s)")


if __name__ == "__main__":
    main()
