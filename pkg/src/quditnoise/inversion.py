"""
Linear inversion of comb-round records into sampled spectra.

Rows of the system are (measurement set, round) pairs and columns are
(frequency index, spectrum) pairs:

    row n    -> round n' = n mod N + 1,   set n'' = n // N
    column m -> harmonic m' = m // S + 1, spectrum m'' = m mod S

Round n' only senses harmonics that are multiples of n', which gives the
matrix its divisibility sparsity.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .pulses import ConfigurationError

COND_LIMIT = 1e12


class SolverError(RuntimeError):
    def __init__(self, message, null_dimension):
        super().__init__(message)
        self.null_dimension = null_dimension


@dataclass(frozen=True)
class ReconstructionProblem:
    matrix: np.ndarray
    rhs: np.ndarray
    grid: np.ndarray
    names: tuple
    n_sets: int

    @property
    def n_spectra(self):
        return len(self.names)

    @property
    def n_grid(self):
        return self.grid.size

    def row_index(self, n):
        """(set, round) of row n."""
        return n // self.n_grid, n % self.n_grid + 1

    def column_index(self, m):
        """(harmonic k, spectrum position) of column m."""
        return m // self.n_spectra + 1, m % self.n_spectra


@dataclass(frozen=True)
class ReconstructionResult:
    estimates: dict
    solution: np.ndarray
    grid: np.ndarray
    residual_norm: float
    condition: float
    imaginary_leakage: float
    method: str


def assemble(models, cfg, records):
    """Build A x = b from per-set coefficient models and records [set, round]."""
    records = np.asarray(records, dtype=complex)
    n_grid = cfg.N
    if records.shape != (len(models), n_grid):
        raise ConfigurationError(
            f"expected records for {len(models)} sets x {n_grid} rounds, got shape {records.shape}")
    names = models[0].names
    if any(m.names != names for m in models):
        raise ConfigurationError("all measurement sets must share one scenario")
    n_spec = len(names)
    rows, cols = len(models) * n_grid, n_grid * n_spec
    matrix = np.zeros((rows, cols), dtype=complex)
    rhs = np.empty(rows, dtype=complex)
    for s, model in enumerate(models):
        for r in range(1, n_grid + 1):
            period = cfg.period(r)
            n = s * n_grid + (r - 1)
            scale = model.comb_scale * cfg.M / period
            rhs[n] = (model.eta - records[s, r - 1]) / scale
            harmonics = np.arange(r, n_grid + 1, r)
            coeffs = model.coefficients(harmonics * cfg.omega0, period)
            for k, c in zip(harmonics, coeffs):
                matrix[n, (k - 1) * n_spec:k * n_spec] = c
    return ReconstructionProblem(matrix, rhs, cfg.grid(), names, len(models))


def _null_dimension(matrix):
    s = np.linalg.svd(matrix, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return matrix.shape[1]
    tol = s[0] * max(matrix.shape) * np.finfo(float).eps
    return int(matrix.shape[1] - np.sum(s > tol))


def solve(problem):
    a, b = problem.matrix, problem.rhs
    null_dim = _null_dimension(a)
    if null_dim > 0:
        raise SolverError(f"coefficient matrix is singular (null space dimension {null_dim})",
                          null_dim)
    if a.shape[0] == a.shape[1]:
        condition = float(abs(np.linalg.cond(a, 1)))
    else:
        condition = float(np.linalg.cond(a))
    if a.shape[0] == a.shape[1] and condition <= COND_LIMIT:
        x = lu_solve(lu_factor(a), b)
        method = "lu"
    else:
        x = np.linalg.lstsq(a, b, rcond=None)[0]
        method = "lstsq"
    residual = float(np.linalg.norm(a @ x - b))
    n_spec = problem.n_spectra
    estimates = {name: x[i::n_spec].real.copy() for i, name in enumerate(problem.names)}
    return ReconstructionResult(estimates, x, problem.grid, residual, condition,
                                float(np.max(np.abs(x.imag))) if x.size else 0.0, method)


def error_report(result, truth, threshold=1e-6):
    """RMSE, max error and relative RMSE per spectrum against a known truth.

    The relative RMSE is taken over nodes where |truth| exceeds ``threshold``
    times its peak and is normalised by the RMS of the truth there.
    """
    report = {}
    for name, estimate in result.estimates.items():
        exact = truth[name](result.grid)
        err = estimate - exact
        peak = np.max(np.abs(exact)) if exact.size else 0.0
        mask = np.abs(exact) > threshold * peak if peak > 0 else np.zeros(exact.shape, bool)
        if mask.any():
            rel = float(np.sqrt(np.mean(err[mask] ** 2)) / np.sqrt(np.mean(exact[mask] ** 2)))
        else:
            rel = float(np.sqrt(np.mean(err**2))) if err.size else 0.0
        report[name] = {
            "rmse": float(np.sqrt(np.mean(err**2))),
            "max_abs_error": float(np.max(np.abs(err))),
            "relative_rmse": rel,
        }
    return report
