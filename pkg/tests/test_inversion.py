import numpy as np
import pytest

from quditnoise.forward_model import (AntimonyParams, CombConfig, InitialStateSpec,
                                      MeasurementSet, ObservableSpec, build_antimony_model,
                                      build_qutrit_model, build_rw_model, simulate_records)
from quditnoise.inversion import (ReconstructionResult, SolverError, assemble, error_report,
                                  solve)
from quditnoise.noise_models import Poissonian, RealSpectrum, ScenarioSpectra
from quditnoise.pulses import ConfigurationError, antimony_sequence, cyclic_sequence

QUTRIT_SETS = [MeasurementSet(ObservableSpec(0.3, 1, 1), InitialStateSpec(1, 1, 2)),
               MeasurementSet(ObservableSpec(0.2, 1, 2), InitialStateSpec(0.7, 2, 1)),
               MeasurementSet(ObservableSpec(0.4, 2, 1), InitialStateSpec(0.6, 2, 2))]
TRUTH = ScenarioSpectra("qutrit-rw", {"R1": RealSpectrum(Poissonian(0.18)),
                                      "I1": RealSpectrum(Poissonian(0.15)),
                                      "E": RealSpectrum(Poissonian(0.12))})
CFG5 = CombConfig(1.0, 30, 5 * 2 * np.pi + 1e-9)


@pytest.fixture(scope="module")
def qutrit_models():
    return [build_qutrit_model(s) for s in QUTRIT_SETS]


def test_shape_and_sparsity(qutrit_models):
    records = simulate_records(qutrit_models, TRUTH, CFG5, "comb")
    problem = assemble(qutrit_models, CFG5, records)
    assert problem.matrix.shape == (15, 15) and problem.rhs.shape == (15,)
    n_spec, n_grid = 3, 5
    for n in range(15):
        _, r = problem.row_index(n)
        for m in range(15):
            k, _ = problem.column_index(m)
            if k % r:
                assert problem.matrix[n, m] == 0
        blocks = {problem.column_index(m)[0] for m in range(15) if problem.matrix[n, m] != 0}
        assert len(blocks) <= n_grid // r
    # row group r = N keeps only the harmonic k = N
    last = [m for m in range(15) if problem.matrix[n_grid - 1, m] != 0]
    assert {problem.column_index(m)[0] for m in last} == {n_grid}


def test_index_maps_are_bijections(qutrit_models):
    records = simulate_records(qutrit_models, TRUTH, CFG5, "comb")
    problem = assemble(qutrit_models, CFG5, records)
    rows = {problem.row_index(n) for n in range(15)}
    cols = {problem.column_index(m) for m in range(15)}
    assert rows == {(s, r) for s in range(3) for r in range(1, 6)}
    assert cols == {(k, i) for k in range(1, 6) for i in range(3)}


def test_entries_match_direct_coefficients(qutrit_models):
    records = simulate_records(qutrit_models, TRUTH, CFG5, "comb")
    problem = assemble(qutrit_models, CFG5, records)
    for n in range(15):
        s, r = problem.row_index(n)
        for m in range(15):
            k, i = problem.column_index(m)
            if k % r == 0:
                direct = qutrit_models[s].coefficients([(k // r) * r * CFG5.omega0],
                                                       CFG5.period(r))[0, i]
                assert abs(problem.matrix[n, m] - direct) <= 1e-12 * max(1.0, abs(direct))


def test_comb_self_consistency(qutrit_models):
    records = simulate_records(qutrit_models, TRUTH, CFG5, "comb")
    result = solve(assemble(qutrit_models, CFG5, records))
    for metrics in error_report(result, TRUTH).values():
        assert metrics["relative_rmse"] <= 1e-8
    norm = np.linalg.norm(result.solution)
    assert result.imaginary_leakage <= 1e-6 * norm
    assert result.method == "lu" and result.condition > 1


def test_eta_only_records_give_zero(qutrit_models):
    records = np.array([[m.eta] * CFG5.N for m in qutrit_models])
    result = solve(assemble(qutrit_models, CFG5, records))
    assert np.all(result.solution == 0)


def test_set_permutation_invariance(qutrit_models):
    records = simulate_records(qutrit_models, TRUTH, CFG5, "integral", fast_poissonian=True)
    base = solve(assemble(qutrit_models, CFG5, records))
    order = [2, 0, 1]
    permuted = solve(assemble([qutrit_models[i] for i in order], CFG5, records[order]))
    for name in base.estimates:
        assert np.allclose(base.estimates[name], permuted.estimates[name], rtol=1e-10, atol=1e-12)


def test_extra_sets_use_least_squares(qutrit_models):
    models = qutrit_models + qutrit_models[:1]
    records = simulate_records(models, TRUTH, CFG5, "comb")
    result = solve(assemble(models, CFG5, records))
    assert result.method == "lstsq"
    for metrics in error_report(result, TRUTH).values():
        assert metrics["relative_rmse"] <= 1e-8


def test_record_count_mismatch(qutrit_models):
    with pytest.raises(ConfigurationError):
        assemble(qutrit_models, CFG5, np.zeros((3, 4)))
    rw = build_rw_model(4, MeasurementSet(ObservableSpec(1, 3, 3), InitialStateSpec(1, 1, 1)),
                        cyclic_sequence(4))
    with pytest.raises(ConfigurationError):
        assemble(qutrit_models[:1] + [rw], CFG5, np.zeros((2, 5)))


def test_singular_matrix_reports_null_dimension(qutrit_models):
    # the same set three times cannot separate three spectra
    models = [qutrit_models[0]] * 3
    records = np.zeros((3, CFG5.N), dtype=complex)
    with pytest.raises(SolverError) as err:
        solve(assemble(models, CFG5, records))
    assert err.value.null_dimension > 0


def test_published_antimony_design_is_singular():
    # Iz stays diagonal under permutation pulses, so R0 needs q0 + n = 0 mod 8 in some set
    sets = [MeasurementSet(ObservableSpec(1, 1, 7), InitialStateSpec(1, 0, 4)),
            MeasurementSet(ObservableSpec(1, 2, 1), InitialStateSpec(1, 5, 1)),
            MeasurementSet(ObservableSpec(1, 2, 6), InitialStateSpec(1, 1, 0))]
    models = [build_antimony_model(8, s, antimony_sequence(), AntimonyParams()) for s in sets]
    cfg = CombConfig(1.0, 100, 4 * 2 * np.pi + 1e-9)
    with pytest.raises(SolverError) as err:
        solve(assemble(models, cfg, np.zeros((3, cfg.N), dtype=complex)))
    assert err.value.null_dimension == cfg.N


def test_error_report_exact():
    grid = np.array([1.0, 2.0, 3.0])
    truth = ScenarioSpectra("qudit-rw", {"R": RealSpectrum(Poissonian(0.5))})
    result = ReconstructionResult({"R": truth["R"](grid)}, np.zeros(3), grid, 0.0, 1.0, 0.0, "lu")
    assert error_report(result, truth)["R"] == {"rmse": 0.0, "max_abs_error": 0.0,
                                                "relative_rmse": 0.0}


def test_fig2_sweep_monotone(qutrit_models):
    truth = ScenarioSpectra("qutrit-rw", {"E": RealSpectrum(Poissonian(0.12))})
    rmse = []
    for M in (5, 10, 40):
        cfg = CombConfig(1.0, M, 30.0)
        records = simulate_records(qutrit_models, truth, cfg, "integral", fast_poissonian=True)
        rmse.append(error_report(solve(assemble(qutrit_models, cfg, records)), truth)["E"]["rmse"])
    assert rmse[0] > rmse[1] > rmse[2]
