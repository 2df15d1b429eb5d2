"""
Config-driven runner for the noise-spectroscopy scenarios.

    quditnoise run configs/fig1_desk.yaml --out runs/fig1
    quditnoise run configs/fig1_desk.yaml --records runs/fig1/records.csv
    quditnoise verify configs/fig4a.yaml

The config schema is documented in README.md.  Exit codes: 0 ok, 1 failed
verification, 2 configuration error, 3 numerical failure.
"""

import argparse
import csv
from dataclasses import dataclass, field
from fractions import Fraction
import math
from pathlib import Path
import sys
import time

import numpy as np
import yaml

from .filter_functions import (conjugate_index, filter_quadrature, filter_values,
                               table_column)
from .forward_model import (AntimonyParams, CombConfig, InitialStateSpec, MeasurementSet,
                            NumericalError, ObservableSpec, build_model, read_records,
                            rw_odd_coefficient, simulate_records, write_records,
                            xi_coefficient)
from .inversion import SolverError, assemble, error_report, solve
from .noise_models import (RECONSTRUCTED, SCENARIO_COMPONENTS, SCENARIOS, GaussianBumps,
                           Poissonian, Rational, RealSpectrum, ScenarioSpectra, Tabulated,
                           Zero, assemble_polyspectra)
from .pulses import (SEQUENCE_PRESETS, ConfigurationError, PulseSequence, antimony_sequence,
                     build_switching_table, conjugate_weyl_oracle, cyclic_sequence,
                     qutrit_inverting_sequence, qutrit_sequence)

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

TABLE_KIND = {"qutrit-rw": "QutritSpecial", "qudit-rw": "RW", "antimony-w": "W"}
TOP_LEVEL_KEYS = {"scenario", "d", "T", "M", "Omega", "harmonics", "first_bin_start", "sets",
                  "sequence", "spectra", "records", "output", "seed", "record_path",
                  "fast_poissonian", "threads", "error_threshold", "antimony", "debug"}


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    d: int
    comb: CombConfig
    sets: tuple
    sequence: object = None
    spectra: object = None
    records: object = None
    output: Path = Path("runs/out")
    seed: int = 0
    record_path: str = "integral"
    fast_poissonian: bool = False
    threads: int = 1
    error_threshold: float = 1e-6
    antimony: AntimonyParams = field(default_factory=AntimonyParams)
    debug: dict = field(default_factory=dict)

    @property
    def names(self):
        return RECONSTRUCTED[self.scenario]


# config parsing

def _complex(value, where):
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, (int, float)):
        return complex(value)
    raise ConfigurationError(f"{where}: expected a number or [re, im], got {value!r}")


def _require(tree, key, where):
    if not isinstance(tree, dict) or key not in tree:
        raise ConfigurationError(f"{where}: missing key {key!r}")
    return tree[key]


def _parse_set(entry, index):
    where = f"sets[{index}]"
    obs = _require(entry, "observable", where)
    rho = _require(entry, "rho", where)
    observable = ObservableSpec(_complex(obs.get("coeff", 1.0), where + ".observable.coeff"),
                                int(_require(obs, "m", where + ".observable")),
                                int(_require(obs, "n", where + ".observable")))
    state = InitialStateSpec(_complex(rho.get("coeff", 1.0), where + ".rho.coeff"),
                             int(_require(rho, "p0", where + ".rho")),
                             int(_require(rho, "q0", where + ".rho")),
                             bool(entry.get("include_trace_term", False)))
    return MeasurementSet(observable, state)


def _parse_sequence(value, d):
    if value is None:
        return None
    if isinstance(value, str):
        if value not in SEQUENCE_PRESETS:
            raise ConfigurationError(
                f"unknown sequence preset {value!r}; choose from {sorted(SEQUENCE_PRESETS)}")
        return SEQUENCE_PRESETS[value](d)
    pulses = [tuple(int(v) for v in p) for p in _require(value, "pulses", "sequence")]
    bounds = [Fraction(str(b)) for b in _require(value, "boundaries", "sequence")]
    return PulseSequence(tuple(pulses), tuple(bounds))


def _parse_shape(spec, name):
    if not isinstance(spec, dict) or "shape" not in spec:
        raise ConfigurationError(f"spectra.{name}: needs a 'shape' key")
    kind = spec["shape"]
    try:
        if kind == "poissonian":
            return Poissonian(float(spec["g"]), float(spec.get("amplitude", 1.0)))
        if kind == "gaussian":
            return GaussianBumps(tuple(tuple(b) for b in spec["bumps"]))
        if kind == "rational":
            return Rational(float(spec["amplitude"]), float(spec["center"]))
        if kind == "tabulated":
            return Tabulated(tuple(spec["omega"]), tuple(spec["values"]))
        if kind == "zero":
            return Zero()
    except KeyError as exc:
        raise ConfigurationError(f"spectra.{name}: missing parameter {exc}") from None
    raise ConfigurationError(f"spectra.{name}: unknown shape {kind!r}")


def _parse_spectra(tree, scenario):
    if tree is None:
        return None
    parities = SCENARIO_COMPONENTS[scenario]
    components = {}
    for name, spec in tree.items():
        if name not in parities:
            raise ConfigurationError(f"spectrum {name!r} does not belong to scenario {scenario}")
        components[name] = RealSpectrum(_parse_shape(spec, name), parities[name])
    return ScenarioSpectra(scenario, components)


def parse_config(tree, base_dir=Path(".")):
    if not isinstance(tree, dict):
        raise ConfigurationError("config must be a mapping")
    unknown = set(tree) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
    scenario = _require(tree, "scenario", "config")
    if scenario not in SCENARIOS:
        raise ConfigurationError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    d = int(tree.get("d", {"qutrit-rw": 3, "antimony-w": 8}.get(scenario, 0)))
    if scenario == "qutrit-rw" and d != 3:
        raise ConfigurationError("qutrit-rw requires d = 3")
    if scenario == "antimony-w" and d != 8:
        raise ConfigurationError("antimony-w requires d = 8")
    if d < 2:
        raise ConfigurationError("d must be at least 2")

    T = float(_require(tree, "T", "config"))
    if "Omega" in tree and "harmonics" in tree:
        raise ConfigurationError("give either Omega or harmonics, not both")
    if "harmonics" in tree:
        omega = int(tree["harmonics"]) * 2.0 * math.pi / T
    else:
        omega = float(_require(tree, "Omega", "config"))
    comb = CombConfig(T, int(_require(tree, "M", "config")), omega,
                      float(tree.get("first_bin_start", 1e-3)))

    raw_sets = _require(tree, "sets", "config")
    if not isinstance(raw_sets, list) or not raw_sets:
        raise ConfigurationError("sets must be a non-empty list")
    sets = tuple(_parse_set(entry, i) for i, entry in enumerate(raw_sets))
    n_unknown = len(RECONSTRUCTED[scenario])
    if len(sets) < n_unknown:
        raise ConfigurationError(
            f"scenario {scenario} needs at least {n_unknown} measurement sets, got {len(sets)}")

    sequence = _parse_sequence(tree.get("sequence"), d)
    if scenario == "qudit-rw" and sequence is None:
        sequence = SEQUENCE_PRESETS["cyclic"](d)

    record_path = tree.get("record_path", "integral")
    if record_path not in ("integral", "comb"):
        raise ConfigurationError("record_path must be 'integral' or 'comb'")
    records = tree.get("records")
    spectra = _parse_spectra(tree.get("spectra"), scenario)
    if spectra is None and records is None:
        raise ConfigurationError("give either synthetic spectra or a records file")

    sb = tree.get("antimony", {}) or {}
    params = AntimonyParams(float(sb.get("gamma_n", 1.0)), float(sb.get("B0", 1.0)),
                            int(sb.get("hyperfine_sign", 1)))
    threads = int(tree.get("threads", 1))
    if threads < 1:
        raise ConfigurationError("threads must be at least 1")
    return RunConfig(
        scenario=scenario, d=d, comb=comb, sets=sets, sequence=sequence, spectra=spectra,
        records=(base_dir / records) if records else None,
        output=(base_dir / tree.get("output", "runs/out")).resolve(),
        seed=int(tree.get("seed", 0)), record_path=record_path,
        fast_poissonian=bool(tree.get("fast_poissonian", False)), threads=threads,
        error_threshold=float(tree.get("error_threshold", 1e-6)), antimony=params,
        debug=dict(tree.get("debug", {}) or {}))


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config {path} is not valid YAML: {exc}") from None
    try:
        return parse_config(tree, path.parent)
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"config {path}: {exc}") from None


def build_models(config):
    return [build_model(config.scenario, config.d, s, config.sequence, config.antimony)
            for s in config.sets]


# run

def _fmt(value):
    return format(float(value), ".17g")


def write_spectrum_csv(path, grid, truth, estimate):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("k", "omega", "truth", "estimate", "abs_error"))
        for k, (w, est) in enumerate(zip(grid, estimate), start=1):
            if truth is None:
                writer.writerow((k, format(float(w), ".9g"), "", _fmt(est), ""))
            else:
                exact = truth[k - 1]
                writer.writerow((k, format(float(w), ".9g"), _fmt(exact), _fmt(est),
                                 _fmt(abs(est - exact))))


def _pair(z):
    return [float(np.real(z)), float(np.imag(z))]


def run(config, records_path=None, out_dir=None, threads=None, fast_poissonian=None):
    """Simulate or ingest records, invert them and write CSVs plus a report.

    Returns the report dictionary and the reconstruction result.
    """
    timings = {}
    threads = threads or config.threads
    fast = config.fast_poissonian if fast_poissonian is None else fast_poissonian
    out = Path(out_dir) if out_dir else config.output
    records_path = records_path or config.records
    comb = config.comb

    start = time.perf_counter()
    models = build_models(config)
    timings["build"] = time.perf_counter() - start

    start = time.perf_counter()
    if records_path:
        records = read_records(records_path, len(models), comb.N)
        mode = "measured"
    else:
        records = simulate_records(models, config.spectra, comb, config.record_path,
                                   threads=threads, fast_poissonian=fast)
        mode = "synthetic"
    timings["records"] = time.perf_counter() - start

    start = time.perf_counter()
    problem = assemble(models, comb, records)
    timings["assemble"] = time.perf_counter() - start
    start = time.perf_counter()
    result = solve(problem)
    timings["solve"] = time.perf_counter() - start

    start = time.perf_counter()
    out.mkdir(parents=True, exist_ok=True)
    grid = result.grid
    with_truth = mode == "synthetic" and config.spectra is not None
    for name in config.names:
        truth = config.spectra[name](grid) if with_truth else None
        write_spectrum_csv(out / f"{name}.csv", grid, truth, result.estimates[name])
    if mode == "synthetic":
        write_records(out / "records.csv", records)
    metrics = error_report(result, config.spectra, config.error_threshold) if with_truth else {}
    timings["write"] = time.perf_counter() - start

    report = {
        "scenario": config.scenario,
        "d": config.d,
        "mode": mode,
        "record_path": config.record_path if mode == "synthetic" else "file",
        "T": comb.T, "M": comb.M, "Omega": comb.Omega, "omega0": comb.omega0, "N": comb.N,
        "first_bin_start": comb.first_bin_start,
        "eta": [_pair(m.eta) for m in models],
        "condition": result.condition,
        "method": result.method,
        "residual_norm": result.residual_norm,
        "imaginary_leakage": result.imaginary_leakage,
        "metrics": metrics,
        "wall_clock_seconds": timings,
        "threads": threads,
    }
    with open(out / "report.yaml", "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(report, fh, sort_keys=False)
    return report, result


# verify

def _default_truth(scenario):
    g = {"qutrit-rw": (0.18, 0.15, 0.12), "qudit-rw": (0.2,), "antimony-w": (0.2, 0.22, 0.25)}
    parities = SCENARIO_COMPONENTS[scenario]
    return ScenarioSpectra(scenario, {name: RealSpectrum(Poissonian(rate), parities[name])
                                      for name, rate in zip(RECONSTRUCTED[scenario], g[scenario])})


def _table_for(config):
    sequence = config.sequence
    if sequence is None:
        if config.scenario == "qutrit-rw":
            sequence = qutrit_sequence()
        elif config.scenario == "antimony-w" and config.d == 8:
            sequence = antimony_sequence()
        else:
            sequence = cyclic_sequence(config.d)
    return build_switching_table(config.d, sequence, TABLE_KIND[config.scenario])


def _source_indices(table, rng=None, limit=64):
    d = table.d
    if table.kind == "QutritSpecial":
        return [1, 2]
    if table.kind == "RW":
        indices = [(a, m) for a in range(d) for m in range(d)]
    else:
        indices = [(a, b, a2, b2) for a in range(d) for b in range(d)
                   for a2 in range(d) for b2 in range(d)]
    if len(indices) <= limit:
        return indices
    rng = rng or np.random.default_rng(0)
    return [indices[i] for i in sorted(rng.choice(len(indices), size=limit, replace=False))]


def check_switching_oracle(table):
    """Largest deviation between a switching table and direct conjugation."""
    d = table.d
    worst = 0.0
    if table.kind == "QutritSpecial":
        rotated = qutrit_inverting_sequence()
        for h, pulse in enumerate(rotated.pulses):
            for a in (1, 2):
                oracle = conjugate_weyl_oracle(3, pulse, a, 0)[(-a) % 3, 0]
                worst = max(worst, abs(table.values[h, a] - oracle))
        return worst
    for h, pulse in enumerate(table.sequence.pulses):
        for a in range(d):
            if table.kind == "RW":
                oracle = conjugate_weyl_oracle(d, pulse, a, 0)[:, 0]
                worst = max(worst, float(np.max(np.abs(table.values[h, a] - oracle))))
            else:
                for b in range(d):
                    oracle = conjugate_weyl_oracle(d, pulse, a, b)
                    worst = max(worst, float(np.max(np.abs(table.values[h, a, b] - oracle))))
    return worst


def check_filter_quadrature(table, omega, period, rng=None):
    bp = table.sequence.breakpoints()
    worst = 0.0
    for idx in _source_indices(table, rng):
        y = table_column(table, idx)
        closed = filter_values(y, bp, period, omega)
        ref = filter_quadrature(y, bp, period, omega)
        scale = max(float(np.max(np.abs(ref))), 1e-300)
        worst = max(worst, float(np.max(np.abs(closed - ref))) / scale)
    return worst


def check_filter_repetition(table, omega, period, reps, rng=None):
    bp = table.sequence.breakpoints()
    worst = 0.0
    shifts = np.exp(1j * omega[:, None] * period * np.arange(reps)[None, :]).sum(axis=1)
    for idx in _source_indices(table, rng):
        y = table_column(table, idx)
        fast = filter_values(y, bp, period, omega, reps=reps)
        direct = filter_values(y, bp, period, omega) * shifts
        scale = max(float(np.max(np.abs(direct))), 1.0)
        worst = max(worst, float(np.max(np.abs(fast - direct))) / scale)
    return worst


def check_filter_conjugation(table, omega, period, rng=None):
    bp = table.sequence.breakpoints()
    worst = 0.0
    for idx in _source_indices(table, rng):
        negated, phase = conjugate_index(table, idx)
        lhs = np.conj(filter_values(table_column(table, negated), bp, period, omega))
        rhs = filter_values(table_column(table, idx), bp, period, -omega) * phase
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def check_symmetries(config, models, spectra, omega, period):
    """Scenario-specific symmetry identities, as (name, deviation) pairs."""
    out = []
    poly_pos = assemble_polyspectra(spectra, omega)
    poly_neg = assemble_polyspectra(spectra, -omega)
    if config.scenario == "qutrit-rw":
        worst = 0.0
        for a, b in poly_pos:
            swapped = poly_neg[(b, a)]
            partner = np.conj(poly_neg[((-a) % 3, (-b) % 3)])
            worst = max(worst, float(np.max(np.abs(poly_pos[(a, b)] - swapped))),
                        float(np.max(np.abs(poly_pos[(a, b)] - partner))))
        out.append(("polyspectrum symmetry", worst))
    elif config.scenario == "qudit-rw":
        s = poly_pos[()]
        out.append(("polyspectrum conjugation", float(np.max(np.abs(s - np.conj(poly_neg[()]))))))
        out.append(("odd coefficient cancels",
                    max(float(np.max(np.abs(rw_odd_coefficient(m, omega, period))))
                        for m in models)))
    else:
        worst_even, worst_cross = 0.0, 0.0
        for m in models:
            for pair in ((0, 0), (1, 1)):
                a = xi_coefficient(m, *pair, omega, period)
                b = xi_coefficient(m, *pair, -omega, period)
                worst_even = max(worst_even, float(np.max(np.abs(a - b))))
            cross = xi_coefficient(m, 0, 1, -omega, period) - xi_coefficient(m, 1, 0, omega, period)
            worst_cross = max(worst_cross, float(np.max(np.abs(cross))))
        out.append(("diagonal Xi parity", worst_even))
        out.append(("cross Xi exchange", worst_cross))
        out.append(("polyspectrum exchange",
                    float(np.max(np.abs(poly_pos[(0, 1)] - poly_neg[(1, 0)])))))
    return out


def check_comb_self_consistency(models, spectra, comb):
    records = simulate_records(models, spectra, comb, "comb")
    result = solve(assemble(models, comb, records))
    report = error_report(result, spectra)
    return max(v["relative_rmse"] for v in report.values())


def verify(config, corrupt_switching_table=None):
    """Run the property suite for one config; returns [(name, passed, value, tol)]."""
    if corrupt_switching_table is None:
        corrupt_switching_table = bool(config.debug.get("corrupt_switching_table", False))
    rng = np.random.default_rng(config.seed)
    models = build_models(config)
    table = _table_for(config)
    if corrupt_switching_table:
        values = table.values.copy()
        values.flat[values.size // 2 + 1] += 0.25
        values.setflags(write=False)
        table = type(table)(table.d, table.kind, table.sequence, values)
    spectra = config.spectra or _default_truth(config.scenario)
    comb = config.comb
    period = comb.period(1)
    omega = np.sort(rng.uniform(-comb.Omega, comb.Omega, size=50))

    checks = [
        ("switching table matches conjugation oracle", check_switching_oracle(table), 1e-12),
        ("filter closed form matches quadrature", check_filter_quadrature(table, omega, period, rng),
         1e-10),
        ("comb factor matches repeated sum",
         check_filter_repetition(table, omega, period, comb.M, rng), 1e-12),
        ("filter conjugation identity", check_filter_conjugation(table, omega, period, rng), 1e-12),
    ]
    for name, value in check_symmetries(config, models, spectra, omega, period):
        checks.append((name, value, 1e-12))
    checks.append(("comb self-consistency",
                   check_comb_self_consistency(models, spectra, comb), 1e-8))
    return [(name, bool(value <= tol), float(value), tol) for name, value, tol in checks]


# entry point

def build_parser():
    parser = argparse.ArgumentParser(prog="quditnoise",
                                     description="Qudit noise spectroscopy by comb inversion")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="simulate or ingest records and reconstruct spectra")
    run_p.add_argument("config")
    run_p.add_argument("--records", help="CSV of measured records (measured mode)")
    run_p.add_argument("--out", help="output directory")
    run_p.add_argument("--threads", type=int, help="worker threads for record evaluation")
    run_p.add_argument("--fast-poissonian", action="store_true", default=None,
                       help="closed-form integrals for Poissonian spectra")
    ver_p = sub.add_parser("verify", help="run the property suite for a config")
    ver_p.add_argument("config")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.command == "verify":
            checks = verify(config)
            for name, passed, value, tol in checks:
                print(f"{'PASS' if passed else 'FAIL'}  {name}  ({value:.3g} <= {tol:g})")
            failed = [c[0] for c in checks if not c[1]]
            if failed:
                print("failed: " + ", ".join(failed), file=sys.stderr)
                return EXIT_VERIFY
            return EXIT_OK
        if args.threads is not None and args.threads < 1:
            raise ConfigurationError("--threads must be at least 1")
        report, _ = run(config, args.records, args.out, args.threads, args.fast_poissonian)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, NumericalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out = Path(args.out) if args.out else config.output
    print(f"wrote {', '.join(n + '.csv' for n in config.names)} and report.yaml to {out}")
    for name, m in report["metrics"].items():
        print(f"  {name}: rmse {m['rmse']:.4g}  relative {m['relative_rmse']:.4g}")
    print(f"  condition {report['condition']:.4g} ({report['method']})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
