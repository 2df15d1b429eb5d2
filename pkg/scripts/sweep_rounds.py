"""Relative RMSE against the number of repetitions M for one preset.

    python3 scripts/sweep_rounds.py configs/fig3.yaml 20 40 80 160

The integral records approach the comb model as M grows, so the error of
the integral path should fall roughly like 1/M.
"""

import argparse
import dataclasses

from quditnoise.cli import build_models, load_config
from quditnoise.forward_model import simulate_records
from quditnoise.inversion import assemble, error_report, solve


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("config")
    parser.add_argument("M", type=int, nargs="+")
    args = parser.parse_args()
    config = load_config(args.config)
    models = build_models(config)
    for M in args.M:
        comb = dataclasses.replace(config.comb, M=M)
        records = simulate_records(models, config.spectra, comb, config.record_path,
                                   threads=config.threads, fast_poissonian=config.fast_poissonian)
        result = solve(assemble(models, comb, records))
        metrics = error_report(result, config.spectra, config.error_threshold)
        print(f"M={M:5d} " + " ".join(f"{k}={v['relative_rmse']:.3%}" for k, v in metrics.items()))


if __name__ == "__main__":
    main()
