"""Run every reconstruction preset in configs/ and print a one-line summary each.

    python3 scripts/run_presets.py [name ...]
"""

import sys
from pathlib import Path

from quditnoise.cli import load_config, run
from quditnoise.inversion import SolverError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SKIP = {"qutrit_verify"}


def main(names):
    paths = [CONFIGS / f"{n}.yaml" for n in names] if names else sorted(CONFIGS.glob("*.yaml"))
    for path in paths:
        if path.stem in SKIP:
            continue
        config = load_config(path)
        try:
            report, _ = run(config)
        except SolverError as exc:
            print(f"{path.stem:16s} singular, null space dimension {exc.null_dimension}")
            continue
        errors = " ".join(f"{k}={v['relative_rmse']:.2%}" for k, v in report["metrics"].items())
        total = sum(report["wall_clock_seconds"].values())
        print(f"{path.stem:16s} N={report['N']:3d} cond={report['condition']:9.1f} "
              f"{errors}  {total:.1f}s -> {config.output}")


if __name__ == "__main__":
    main(sys.argv[1:])
