"""Acceptance gates, one test per criterion.

Each test records a PASS/FAIL line that tests/conftest.py prints at the end
of the session.  Running this file directly prints the same lines.
"""

import itertools
from pathlib import Path
import time

import numpy as np
import pytest
from scipy.integrate import quad

from quditnoise.cli import load_config, run
from quditnoise.filter_functions import filter_quadrature, filter_values, table_column
from quditnoise.forward_model import (AntimonyParams, CombConfig, InitialStateSpec,
                                      MeasurementSet, ObservableSpec, antimony_beta_tilde,
                                      build_antimony_model, poissonian_cell, rw_odd_coefficient,
                                      simulate_records, xi_coefficient)
from quditnoise.inversion import assemble, error_report, solve
from quditnoise.noise_models import (SCENARIO_COMPONENTS, GaussianBumps, Parity, Poissonian,
                                     RealSpectrum, ScenarioSpectra, assemble_polyspectra)
from quditnoise.pulses import (antimony_sequence, build_switching_table, conjugate_weyl_oracle,
                               cyclic_sequence, qutrit_inverting_sequence, qutrit_sequence,
                               switching_full, switching_qutrit, switching_reduced)
from quditnoise.weyl_algebra import spin_operators, weyl_reconstruct, xi_power

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
RESULTS = {}


def record(number, passed, detail):
    RESULTS[number] = (bool(passed), detail)
    return passed


def reconstruct(name, out_dir, **overrides):
    config = load_config(CONFIGS / f"{name}.yaml")
    start = time.perf_counter()
    report, result = run(config, out_dir=out_dir, **overrides)
    return config, report, result, time.perf_counter() - start


def relative_rmse(result, truth, name, fraction):
    exact = truth[name](result.grid)
    mask = np.abs(exact) > fraction * np.max(np.abs(exact))
    err = result.estimates[name][mask] - exact[mask]
    return float(np.sqrt(np.mean(err**2)) / np.sqrt(np.mean(exact[mask] ** 2)))


def comb_self_consistency(config):
    from quditnoise.cli import build_models
    models = build_models(config)
    records = simulate_records(models, config.spectra, config.comb, "comb")
    result = solve(assemble(models, config.comb, records))
    return max(m["relative_rmse"] for m in error_report(result, config.spectra).values())


def test_criterion_1_switching_oracle():
    start = time.perf_counter()
    worst_full = worst_reduced = 0.0
    for d in (2, 3, 4, 5):
        for i, j in itertools.permutations(range(d), 2):
            for a, b in itertools.product(range(d), repeat=2):
                oracle = conjugate_weyl_oracle(d, (i, j), a, b)
                worst_full = max(worst_full, np.max(np.abs(switching_full(d, (i, j), a, b) - oracle)))
                if b == 0:
                    worst_reduced = max(worst_reduced, np.max(np.abs(
                        switching_reduced(d, (i, j), a) - oracle[:, 0])))
    elapsed = time.perf_counter() - start
    passed = worst_full <= 1e-12 and worst_reduced <= 1e-12 and elapsed < 60
    record(1, passed, f"full {worst_full:.1e}, reduced {worst_reduced:.1e}, {elapsed:.1f}s")
    assert passed


def test_criterion_2_qutrit_special_table():
    table = build_switching_table(3, qutrit_sequence(), "QutritSpecial")
    reduced = build_switching_table(3, qutrit_inverting_sequence(), "RW")
    exact = all(table.values[h, a] == switching_qutrit(h + 1, a) for h in range(3) for a in range(3))
    expected = {1: lambda a: 1.0, 2: lambda a: xi_power(3, -a), 3: lambda a: xi_power(3, a)}
    worst = max(abs(table.values[h, a] - expected[h + 1](a)) for h in range(3) for a in range(3))
    # the same values arise from the permutation pulses carrying Z^a onto Z^-a
    carried = max(abs(reduced.values[h, a, (-a) % 3] - table.values[h, a])
                  for h in range(3) for a in (1, 2))
    passed = exact and worst == 0 and carried <= 1e-12
    record(2, passed, f"table vs values {worst:.1e}, vs pulse conjugation {carried:.1e}")
    assert passed


def test_criterion_3_filter_functions():
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    tables = {
        "qutrit": (build_switching_table(3, qutrit_sequence(), "QutritSpecial"), [1, 2]),
        "ququad": (build_switching_table(4, cyclic_sequence(4), "RW"),
                   [(a, m) for a in range(4) for m in range(4)]),
        "antimony": (build_switching_table(8, antimony_sequence(), "W"),
                     [tuple(rng.integers(0, 8, 4)) for _ in range(24)]),
    }
    worst_quad = worst_rep = 0.0
    for table, indices in tables.values():
        bp = table.sequence.breakpoints()
        omega = rng.uniform(-200 * 2 * np.pi, 200 * 2 * np.pi, size=200)
        shifts = np.exp(1j * omega[:, None] * 0.5 * np.arange(9)[None, :]).sum(axis=1)
        for idx in indices:
            y = table_column(table, idx)
            ref = filter_quadrature(y, bp, 1.0, omega, nodes=32)
            peak = np.max(np.abs(ref))
            if peak > 0:
                worst_quad = max(worst_quad, np.max(np.abs(filter_values(y, bp, 1.0, omega) - ref)) / peak)
            fast = filter_values(y, bp, 0.5, omega, reps=9)
            direct = filter_values(y, bp, 0.5, omega) * shifts
            worst_rep = max(worst_rep, np.max(np.abs(fast - direct)))
    elapsed = time.perf_counter() - start
    passed = worst_quad <= 1e-10 and worst_rep <= 1e-12 and elapsed < 60
    record(3, passed, f"quadrature {worst_quad:.1e}, repetition {worst_rep:.1e}, {elapsed:.1f}s")
    assert passed


def test_criterion_4_comb_self_consistency():
    values = {name: comb_self_consistency(load_config(CONFIGS / f"{name}.yaml"))
              for name in ("fig1_desk", "fig3", "fig4a", "fig4b_smoke", "antimony_desk")}
    passed = max(values.values()) <= 1e-8
    record(4, passed, ", ".join(f"{k} {v:.1e}" for k, v in values.items()))
    assert passed


def test_criterion_5_fig1_desk(tmp_path):
    config, _, result, elapsed = reconstruct("fig1_desk", tmp_path)
    errors = {n: relative_rmse(result, config.spectra, n, 0.01) for n in ("R1", "I1", "E")}
    passed = max(errors.values()) <= 0.05 and elapsed <= 600
    record(5, passed, ", ".join(f"{k} {v:.2%}" for k, v in errors.items()) + f", {elapsed:.1f}s")
    assert passed


def test_criterion_6_fig2_monotone(tmp_path):
    rmse = []
    for M in (5, 10, 40):
        config, _, result, _ = reconstruct(f"fig2_m{M}", tmp_path / str(M))
        err = result.estimates["E"] - config.spectra["E"](result.grid)
        rmse.append(float(np.sqrt(np.mean(err**2))))
    passed = rmse[0] > rmse[1] > rmse[2]
    record(6, passed, "E rmse " + " > ".join(f"{v:.3f}" for v in rmse))
    assert passed


def test_criterion_7_fig3_shapes(tmp_path):
    config, _, result, _ = reconstruct("fig3", tmp_path)
    grid, step = result.grid, config.comb.omega0
    worst_shift, worst_amp, lines = 0.0, 0.0, []
    for name, centers in (("R1", (21.0, 13.0)), ("I1", (3.0, 9.0, 14.0))):
        estimate, exact = result.estimates[name], config.spectra[name](grid)
        for center in centers:
            window = np.abs(grid - center) <= step
            shift = abs(grid[window][np.argmax(estimate[window])] - center)
            amp = estimate[window].max() / exact[window].max() - 1
            worst_shift, worst_amp = max(worst_shift, shift), max(worst_amp, abs(amp))
            lines.append(f"{name}@{center:g} {amp:+.1%}")
    passed = worst_shift <= step and worst_amp <= 0.10
    record(7, passed, ", ".join(lines) + f"; worst centre offset {worst_shift:.2f} <= {step:.2f}")
    assert passed


def test_criterion_8_fig4(tmp_path):
    config, _, result, elapsed = reconstruct("fig4a", tmp_path / "a")
    error = relative_rmse(result, config.spectra, "R", 0.05)
    smoke = load_config(CONFIGS / "fig4b_smoke.yaml")
    _, _, _, smoke_time = reconstruct("fig4b_smoke", tmp_path / "b")
    smoke_comb = comb_self_consistency(smoke)
    passed = error <= 0.10 and elapsed <= 1800 and smoke_comb <= 1e-8
    record(8, passed, f"ququad {error:.2%} in {elapsed:.1f}s; quoct smoke ran in "
                      f"{smoke_time:.1f}s, comb {smoke_comb:.1e}")
    assert passed


def test_criterion_9_antimony(tmp_path):
    rng = np.random.default_rng(9)
    params, seq = AntimonyParams(), antimony_sequence()
    worst_even = {"diagonal": 0.0, "cross": 0.0}
    for _ in range(50):
        m, n, p0, q0 = rng.integers(0, 8, 4)
        if (p0, q0) == (0, 0):
            p0 = 1
        if (m, n) == (0, 0):
            m = 1
        pair = tuple(int(v) for v in rng.integers(0, 2, 2))
        omega, period = rng.uniform(0.1, 60), 1.0 / rng.integers(1, 6)
        model = build_antimony_model(8, MeasurementSet(ObservableSpec(1, int(m), int(n)),
                                                       InitialStateSpec(1, int(p0), int(q0))),
                                     seq, params)
        pos = xi_coefficient(model, *pair, [omega], period)[0]
        neg = xi_coefficient(model, *pair, [-omega], period)[0]
        kind = "diagonal" if pair[0] == pair[1] else "cross"
        worst_even[kind] = max(worst_even[kind], abs(pos - neg))

    spins = spin_operators(8)
    coeffs = np.zeros((8, 8), dtype=complex)
    for i, (p, q, q2), (a, b) in itertools.product(range(3), itertools.product(range(8), repeat=3),
                                                   itertools.product(range(8), repeat=2)):
        coeffs[a, b] += antimony_beta_tilde(params, i, p, q, q2, a, b)
    hamiltonian = (params.gamma_n * params.B0 + 0.5) * spins.iz + spins.ix @ spins.ix
    beta_err = float(np.max(np.abs(weyl_reconstruct(coeffs) - hamiltonian)))

    cell_err = 0.0
    for g, tau in ((0.2, 0.0), (0.22, 0.37), (0.25, -1.9), (0.2, 6.1)):
        value, _ = poissonian_cell(g, tau, 1e-3, 62.8)
        re = quad(lambda w: np.exp(-g * w) * np.cos(tau * w), 1e-3, 62.8, epsrel=1e-12, limit=400)[0]
        im = quad(lambda w: np.exp(-g * w) * np.sin(tau * w), 1e-3, 62.8, epsrel=1e-12, limit=400)[0]
        cell_err = max(cell_err, abs(value - complex(re, im)) / abs(complex(re, im)))

    config, _, result, _ = reconstruct("antimony_desk", tmp_path)
    reduced = max(relative_rmse(result, config.spectra, n, 0.01) for n in ("R0", "R0p", "R1"))
    comb = comb_self_consistency(config)

    parity_ok = max(worst_even.values()) <= 1e-10
    passed = parity_ok and beta_err <= 1e-10 and cell_err <= 1e-6 and reduced <= 0.15 and comb <= 1e-8
    record(9, passed, f"Xi parity diagonal {worst_even['diagonal']:.1e}, cross "
                      f"{worst_even['cross']:.1e}; beta {beta_err:.1e}; cell {cell_err:.1e}; "
                      f"M=100 run {reduced:.2%}; comb {comb:.1e}")
    assert passed


def test_criterion_10_symmetry_suite():
    omega = np.linspace(-60, 60, 100)
    rng = np.random.default_rng(10)
    worst = 0.0
    for scenario, parities in SCENARIO_COMPONENTS.items():
        components = {}
        for name, parity in parities.items():
            bumps = tuple((rng.uniform(0.2, 2), rng.uniform(0, 30), rng.uniform(0.01, 0.5))
                          for _ in range(2))
            components[name] = RealSpectrum(GaussianBumps(bumps), parity)
        spectra = ScenarioSpectra(scenario, components)
        pos, neg = assemble_polyspectra(spectra, omega), assemble_polyspectra(spectra, -omega)
        for name, parity in parities.items():
            sign = 1 if parity is Parity.EVEN else -1
            worst = max(worst, np.max(np.abs(spectra[name](-omega) - sign * spectra[name](omega))))
        if scenario == "qutrit-rw":
            for a, b in pos:
                worst = max(worst, np.max(np.abs(pos[(a, b)] - neg[(b, a)])),
                            np.max(np.abs(pos[(a, b)] - np.conj(neg[((-a) % 3, (-b) % 3)]))))
        elif scenario == "qudit-rw":
            worst = max(worst, np.max(np.abs(pos[()] - np.conj(neg[()]))))
        else:
            worst = max(worst, np.max(np.abs(pos[(2, 2)])),
                        np.max(np.abs(pos[(0, 1)] - neg[(1, 0)])),
                        np.max(np.abs(pos[(0, 1)] - np.conj(neg[(0, 1)]))))
    from quditnoise.forward_model import build_rw_model
    odd = 0.0
    for d, (m, n, p, q) in ((4, (3, 3, 1, 1)), (8, (7, 7, 1, 1)), (5, (2, 1, 3, 4))):
        model = build_rw_model(d, MeasurementSet(ObservableSpec(1, m, n), InitialStateSpec(1, p, q)),
                               cyclic_sequence(d))
        odd = max(odd, np.max(np.abs(rw_odd_coefficient(model, omega, 1.0))))
    passed = worst <= 1e-12 and odd <= 1e-12
    record(10, passed, f"spectral identities {worst:.1e}, odd RW coefficient {odd:.1e}")
    assert passed


def test_criterion_11_determinism(tmp_path):
    identical = True
    for name in ("fig1_desk", "fig4a", "antimony_desk"):
        config = load_config(CONFIGS / f"{name}.yaml")
        outputs = []
        for threads in (1, 4):
            out = tmp_path / f"{name}_{threads}"
            run(config, out_dir=out, threads=threads)
            outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        identical &= outputs[0] == outputs[1]
    record(11, identical, "CSV bytes identical for threads 1 and 4" if identical
           else "CSV output differs between thread counts")
    assert identical


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
