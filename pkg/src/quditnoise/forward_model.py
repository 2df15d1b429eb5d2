"""
Measurement simulation for the three noise-spectroscopy scenarios.

Every scenario reduces to the same bilinear structure.  A set of channels
alpha carries per-interval switching values Y[alpha, h]; with the interval
integrals phi_h(w) the channel filters are G_alpha(w) = sum_h Y[alpha, h]
phi_h(w), and the coefficient of the i-th unknown real spectrum is

    C_i(w, t) = sum_{alpha, beta} K_i[alpha, beta] G_alpha(w) G_beta(-w).

Repeating the period M times multiplies C_i by the comb kernel
sin^2(M w T_r / 2) / sin^2(w T_r / 2).  The integral record A^r and the
comb-sum record B^r follow from C_i with scenario-specific prefactors.
"""

from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from numpy.polynomial.legendre import leggauss

from .filter_functions import comb_kernel, interval_integrals
from .noise_models import RECONSTRUCTED, Poissonian
from .pulses import (ConfigurationError, antimony_sequence, build_switching_table,
                     cyclic_sequence, qutrit_sequence)
from .weyl_algebra import check_dim, spin_operators, weyl_decompose, xi_power


class NumericalError(RuntimeError):
    """Quadrature or linear-algebra failure with diagnostics attached."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class ObservableSpec:
    coeff: complex
    m: int
    n: int


@dataclass(frozen=True)
class InitialStateSpec:
    coeff: complex
    p0: int
    q0: int
    trace_term_included: bool = False

    def terms(self, d):
        """Weyl terms of rho as a dict (p, q) -> V_pq."""
        key = (self.p0 % d, self.q0 % d)
        if key == (0, 0):
            raise ConfigurationError("the traceless part of rho needs (p0, q0) != (0, 0)")
        out = {key: complex(self.coeff)}
        if self.trace_term_included:
            out[(0, 0)] = 1.0 / d
        return out


@dataclass(frozen=True)
class MeasurementSet:
    observable: ObservableSpec
    rho: InitialStateSpec


@dataclass(frozen=True)
class CombConfig:
    T: float
    M: int
    Omega: float
    first_bin_start: float = 1e-3

    def __post_init__(self):
        if self.T <= 0 or int(self.M) != self.M or self.M < 1:
            raise ConfigurationError("T must be positive and M a positive integer")
        if self.Omega <= self.omega0:
            raise ConfigurationError("Omega must exceed omega0 = 2 pi / T")
        if not 0 < self.first_bin_start < self.omega0:
            raise ConfigurationError("first_bin_start must lie in (0, omega0)")

    @property
    def omega0(self):
        return 2.0 * math.pi / self.T

    @property
    def N(self):
        return int(math.floor(self.Omega / self.omega0 + 1e-12))

    @property
    def rounds(self):
        return self.N

    def period(self, r):
        return self.T / r

    def grid(self):
        return self.omega0 * np.arange(1, self.N + 1)


@dataclass(frozen=True)
class AntimonyParams:
    gamma_n: float = 1.0
    B0: float = 1.0
    hyperfine_sign: int = 1

    def __post_init__(self):
        if self.hyperfine_sign not in (1, -1):
            raise ConfigurationError("hyperfine_sign must be +1 or -1")


# coupling coefficients

def eta_coefficient(d, obs, rho):
    """eta = d O_mn V_{-m,-n} xi^{mn}."""
    v = rho.terms(d).get(((-obs.m) % d, (-obs.n) % d), 0.0)
    return complex(d * obs.coeff * v * xi_power(d, obs.m * obs.n))


def weyl_lambda(d, obs, rho, az, ax, az2, ax2, anz=None, anx=None):
    """General coupling lambda for one observable term and the terms of rho.

    ``(az, ax)`` and ``(az2, ax2)`` are the Weyl powers of the two
    switching-function targets; ``(anz, anx)`` is the target whose negation
    enters the conjugated filter function (defaults to ``(az2, ax2)``, where
    the last phase factor is 1).
    """
    m, n = obs.m % d, obs.n % d
    anz = az2 if anz is None else anz
    anx = ax2 if anx is None else anx
    total = 0j
    for (p, q), v in rho.terms(d).items():
        if (p + m + az + az2) % d or (q + n + ax + ax2) % d:
            continue
        factor = (1 - xi_power(d, -m * ax + n * az)) * (1 - xi_power(d, az2 * n - ax2 * m))
        phase = xi_power(d, -az2 * ax - m * q + (m + p) * (n + q) + anz * anx - az2 * ax2)
        total += d * obs.coeff * v * factor * phase
    return complex(total)


def eta_lambda_qutrit(obs, rho):
    """eta and lambda_ab for a, b in {1, 2} (2 standing for -1)."""
    d = 3
    m, n = obs.m % d, obs.n % d
    lam = {}
    for a in (1, 2):
        for b in (1, 2):
            total = 0j
            for (p, q), v in rho.terms(d).items():
                if (p - a - b + m) % d or (q + n) % d:
                    continue
                total += 3 * obs.coeff * v * (1 - xi_power(d, -a * n)) \
                    * (1 - xi_power(d, -b * n)) * xi_power(d, m * n)
            lam[(a, b)] = complex(total)
    return eta_coefficient(d, obs, rho), lam


def rw_coupling(d):
    """f_a = (1/d) sum_p xi^{-ap} (I - p) with I = (d - 1)/2."""
    check_dim(d)
    spin = (d - 1) / 2
    p = np.arange(d)
    return np.array([np.sum(xi_power(d, -a * p) * (spin - p)) / d for a in range(d)])


def eta_lambda_rw(d, obs, rho):
    """eta and the (d, d) array lambda[b, b2] for the reduced basis."""
    check_dim(d)
    m, n = obs.m % d, obs.n % d
    lam = np.zeros((d, d), dtype=complex)
    terms = rho.terms(d)
    for b in range(d):
        for b2 in range(d):
            p = (-m - b - b2) % d
            v = terms.get((p, (-n) % d), 0.0)
            lam[b, b2] = d * obs.coeff * v * (1 - xi_power(d, n * b)) \
                * (1 - xi_power(d, n * b2)) * xi_power(d, m * n)
    return eta_coefficient(d, obs, rho), lam


def antimony_beta_tilde(params, i, p, q, q2, a, b, d=8):
    """Static coefficient of branch i for the level triple (p, q, q2)."""
    spins = spin_operators(d)
    iz = np.real(np.diag(spins.iz))
    ix = spins.ix
    p, q, q2, a, b = (int(v) % d for v in (p, q, q2, a, b))
    if i == 0:
        return complex(params.hyperfine_sign * 0.5 * xi_power(d, -a * p) * iz[p] * (b == 0) / d**3)
    if i == 1:
        # Ix^2 [p, q2] pairs with Z^a X^b only when q2 = p - b
        return complex(xi_power(d, -a * p) * ix[p, q] * ix[q, q2] * (p == (q2 + b) % d) / d)
    if i == 2:
        return complex(params.gamma_n * params.B0 * xi_power(d, -a * p) * iz[p] * (b == 0) / d**3)
    raise ValueError(f"branch index must be 0, 1 or 2, got {i!r}")


def antimony_beta_sums(params, d=8):
    """Array [i, a, b] of beta-tilde summed over the level triples."""
    spins = spin_operators(d)
    return np.array([
        weyl_decompose(params.hyperfine_sign * 0.5 * spins.iz),
        weyl_decompose(spins.ix @ spins.ix),
        weyl_decompose(params.gamma_n * params.B0 * spins.iz),
    ])


def lambda_antimony(obs, rho, a1, b1, a2, b2, at, bt, d=8):
    """Full Weyl lambda including the xi^{at bt - a2 b2} factor."""
    return weyl_lambda(d, obs, rho, a1, b1, a2, b2, anz=at, anx=bt)


# scenario models

@dataclass(frozen=True)
class CoefficientModel:
    """Channels and couplings for one measurement set.

    ``couplings[i]`` is the (n_channels, n_channels) matrix K_i of the i-th
    reconstructed spectrum ``names[i]``.
    """

    scenario: str
    d: int
    breakpoints: tuple
    channels: np.ndarray
    couplings: tuple
    names: tuple
    eta: complex
    integral_scale: float
    comb_scale: float
    extras: dict = field(default_factory=dict, compare=False)

    def channel_filters(self, omega, period):
        """G(w) and G(-w), each of shape (len(omega), n_channels)."""
        phi = interval_integrals(omega, self.breakpoints, period)
        g_pos = phi @ self.channels.T
        g_neg = np.conj(phi) @ self.channels.T
        return g_pos, g_neg

    def coefficients(self, omega, period, reps=1):
        """C_i(w, reps * period) as an array (len(omega), n_components)."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        g_pos, g_neg = self.channel_filters(omega, period)
        out = np.empty((omega.size, len(self.couplings)), dtype=complex)
        for i, k in enumerate(self.couplings):
            out[:, i] = np.sum((g_pos @ k) * g_neg, axis=1)
        if reps != 1:
            out *= comb_kernel(omega, period, reps)[:, None]
        return out

    def edge_weights(self):
        """Matrices W_i[u, v] over interval edges for the analytic integrals."""
        y = self.channels
        padded = np.zeros((y.shape[0], y.shape[1] + 2), dtype=complex)
        padded[:, 1:-1] = y
        c = padded[:, :-1] - padded[:, 1:]
        return [c.T @ k @ c for k in self.couplings]


def build_qutrit_model(mset, sequence=None):
    sequence = sequence or qutrit_sequence()
    table = build_switching_table(3, sequence, "QutritSpecial")
    eta, lam = eta_lambda_qutrit(mset.observable, mset.rho)
    channels = np.array([table.values[:, 1], table.values[:, 2]])
    l11, l22, l12, l21 = lam[(1, 1)], lam[(2, 2)], lam[(1, 2)], lam[(2, 1)]
    couplings = (
        2 * np.diag([l11, l22]),
        2j * np.diag([l11, -l22]),
        2 * np.array([[0, l12], [l21, 0]]),
    )
    return CoefficientModel("qutrit-rw", 3, sequence.breakpoints(), channels, couplings,
                            RECONSTRUCTED["qutrit-rw"], eta, 1 / (4 * math.pi), 0.5,
                            {"lambda": lam, "table": table})


def build_rw_model(d, mset, sequence):
    table = build_switching_table(d, sequence, "RW")
    eta, lam = eta_lambda_rw(d, mset.observable, mset.rho)
    f = rw_coupling(d)
    # channel b: sum_a f_a y_{a,b}
    channels = np.einsum("a,hab->bh", f, table.values)
    return CoefficientModel("qudit-rw", d, sequence.breakpoints(), channels, (2 * lam,),
                            RECONSTRUCTED["qudit-rw"], eta, 1 / (4 * math.pi), 0.5,
                            {"lambda": lam, "table": table, "f": f})


def antimony_lambda_core(d, obs, rho):
    """Dense lambda[a1, b1, a2, b2] with the conjugation phase removed."""
    lam = np.zeros((d, d, d, d), dtype=complex)
    m, n = obs.m % d, obs.n % d
    for (p, q) in rho.terms(d):
        for a1 in range(d):
            a2 = (-p - m - a1) % d
            for b1 in range(d):
                b2 = (-q - n - b1) % d
                lam[a1, b1, a2, b2] = weyl_lambda(d, obs, rho, a1, b1, a2, b2)
    return lam


def antimony_channels(d, table, params):
    """Y[i, a1, b1, h] = sum_ab beta_i[a, b] y^{ab}_{a1 b1}(h) for i in {0, 1}."""
    beta = antimony_beta_sums(params, d)[:2]
    return np.einsum("iab,habxy->ixyh", beta, table.values)


@lru_cache(maxsize=32)
def _cached_table(d, sequence, kind):
    return build_switching_table(d, sequence, kind)


@lru_cache(maxsize=32)
def _cached_antimony_channels(d, sequence, params):
    y = antimony_channels(d, _cached_table(d, sequence, "W"), params)
    y.setflags(write=False)
    return y


def _block_matrix(n_ch, lam, pairs):
    k = np.zeros((2 * n_ch, 2 * n_ch), dtype=complex)
    for i, i2 in pairs:
        k[i * n_ch:(i + 1) * n_ch, i2 * n_ch:(i2 + 1) * n_ch] = lam
    return k


def build_antimony_model(d, mset, sequence, params):
    """Channels (i, a1, b1) for the two noisy processes, C = (Xi00, Xi11, Xi01 + Xi10).

    Only the exchange-symmetric part of lambda survives the double time integral
    of a classical correlation function, so the couplings use
    (lambda + lambda^T) / 2.  The unsymmetrised blocks are kept in
    ``extras["raw_blocks"]``.
    """
    table = _cached_table(d, sequence, "W")
    y = _cached_antimony_channels(d, sequence, params)
    n_ch = d * d
    channels = y.reshape(2 * n_ch, -1)
    lam = antimony_lambda_core(d, mset.observable, mset.rho).reshape(n_ch, n_ch)
    sym = 0.5 * (lam + lam.T)
    pairs = ((0, 0), (1, 1), (0, 1), (1, 0))
    blocks = {pair: _block_matrix(n_ch, sym, [pair]) for pair in pairs}
    raw = {pair: _block_matrix(n_ch, lam, [pair]) for pair in pairs}
    couplings = (blocks[(0, 0)], blocks[(1, 1)], blocks[(0, 1)] + blocks[(1, 0)])
    eta = eta_coefficient(d, mset.observable, mset.rho)
    return CoefficientModel("antimony-w", d, sequence.breakpoints(), channels, couplings,
                            RECONSTRUCTED["antimony-w"], eta, 1 / (2 * math.pi), 1.0,
                            {"lambda": lam, "table": table, "blocks": blocks,
                             "raw_blocks": raw})


def build_model(scenario, d, mset, sequence=None, params=None):
    if scenario == "qutrit-rw":
        if d != 3:
            raise ConfigurationError("qutrit-rw requires d = 3")
        return build_qutrit_model(mset, sequence)
    if scenario == "qudit-rw":
        if sequence is None:
            raise ConfigurationError("qudit-rw needs a pulse sequence")
        return build_rw_model(d, mset, sequence)
    if scenario == "antimony-w":
        if sequence is None:
            sequence = antimony_sequence() if d == 8 else cyclic_sequence(d)
        return build_antimony_model(d, mset, sequence, params or AntimonyParams())
    raise ConfigurationError(f"unknown scenario {scenario!r}; expected one of "
                             "qutrit-rw, qudit-rw, antimony-w")


def xi_coefficient(model, i, i2, omega, period, symmetrized=True):
    """Xi_{i i2}(w, period) of an antimony model."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    g_pos, g_neg = model.channel_filters(omega, period)
    k = model.extras["blocks" if symmetrized else "raw_blocks"][(i, i2)]
    return np.sum((g_pos @ k) * g_neg, axis=1)


def coeffs_qutrit(obs, rho, omega, t):
    """(C0, C1, C2, C3) of the qutrit scenario at one frequency and duration."""
    model = build_qutrit_model(MeasurementSet(obs, rho))
    c = model.coefficients([omega], t)[0]
    return complex(c[0]), complex(c[1]), complex(c[2]), 0j


def rw_odd_coefficient(model, omega, period):
    """Coefficient of the odd spectrum I(w) after folding; vanishes identically."""
    g_pos, g_neg = model.channel_filters(omega, period)
    k = model.couplings[0]
    return np.sum((g_pos @ k) * g_neg, axis=1) - np.sum((g_neg @ k) * g_pos, axis=1)


# records

def spectrum_values(spectra, names, omega):
    return np.stack([spectra[name](omega) for name in names], axis=-1)


def comb_teeth(cfg, r):
    """Harmonics r k omega0 that stay inside the detection band."""
    k = np.arange(1, cfg.N // r + 1)
    return r * k * cfg.omega0


def comb_record(model, spectra, cfg, r):
    """B^r = eta - comb_scale * M / T_r * sum_k sum_i C_i x_i at the teeth."""
    period = cfg.period(r)
    teeth = comb_teeth(cfg, r)
    if teeth.size == 0:
        return model.eta
    c = model.coefficients(teeth, period)
    x = spectrum_values(spectra, model.names, teeth)
    return complex(model.eta - model.comb_scale * cfg.M / period * np.sum(c * x))


def _panel_edges(cfg, r, kinks, lo, hi):
    period = cfg.period(r)
    spacing = 2.0 * math.pi / (cfg.M * period)
    j = np.arange(math.ceil(lo / spacing), math.floor(hi / spacing) + 1)
    edges = [lo, hi] + list(j * spacing) + [k for k in kinks if lo < k < hi]
    edges = np.unique(np.array(edges, dtype=float))
    edges = edges[(edges >= lo) & (edges <= hi)]
    # split wide panels so each is at most omega0 / 4
    width = cfg.omega0 / 4
    out = [edges[0]]
    for a, b in zip(edges[:-1], edges[1:]):
        pieces = max(1, math.ceil((b - a) / width - 1e-12))
        out.extend(a + (b - a) * np.arange(1, pieces + 1) / pieces)
    return np.array(out)


def _panel_quadrature(func, edges, nodes):
    x, w = leggauss(nodes)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    points = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    values = func(points)
    return weights @ values, np.abs(weights) @ np.abs(values)


def integral_components(model, spectra, cfg, r, rtol=1e-8, start_nodes=8, max_nodes=128):
    """Per-component integrals of C_i(w, M T_r) x_i(w) over [lo, Omega]."""
    period = cfg.period(r)
    edges = _panel_edges(cfg, r, spectra.kinks(), cfg.first_bin_start, cfg.Omega)

    def integrand(w):
        return model.coefficients(w, period, reps=cfg.M) * spectrum_values(spectra, model.names, w)

    nodes = start_nodes
    previous, _ = _panel_quadrature(integrand, edges, nodes)
    while nodes < max_nodes:
        nodes *= 2
        current, scale = _panel_quadrature(integrand, edges, nodes)
        err = np.max(np.abs(current - previous))
        if err <= rtol * max(np.max(scale), 1e-300):
            return current
        previous = current
    raise NumericalError("integral record did not converge", round=r, nodes=nodes,
                         error=float(err), scale=float(np.max(scale)))


def poissonian_cell(g, tau, lo, hi):
    """integral_lo^hi exp(-g w) exp(i tau w) dw, linear branch when g = tau = 0."""
    rate = -g + 1j * tau
    if rate == 0:
        return complex(hi - lo), True
    return complex((np.exp(rate * hi) - np.exp(rate * lo)) / rate), False


def poissonian_integral(model, g, cfg, r, component, amplitude=1.0):
    """Analytic integral of C_i(w, M T_r) * amplitude w^2 exp(-g w) over [lo, Omega].

    Returns ``(value, degenerate)``; ``degenerate`` flags the use of the
    linear limit for a vanishing exponent.
    """
    period = cfg.period(r)
    lo, hi = cfg.first_bin_start, cfg.Omega
    weights = model.edge_weights()[component]
    s = np.array([float(f) for f in model.breakpoints])
    ks = np.arange(-(cfg.M - 1), cfg.M)
    tau = period * (ks[:, None, None] + s[None, :, None] - s[None, None, :])
    rate = -g + 1j * tau
    degenerate = rate == 0
    safe = np.where(degenerate, 1.0, rate)
    cells = np.where(degenerate, hi - lo, (np.exp(rate * hi) - np.exp(rate * lo)) / safe)
    mult = (cfg.M - np.abs(ks))[:, None, None]
    value = amplitude * np.sum(mult * weights[None, :, :] * cells)
    return complex(value), bool(np.any(degenerate & (weights[None] != 0)))


antimony_poissonian_integral = poissonian_integral


def integral_record(model, spectra, cfg, r, fast_poissonian=False):
    """A^r = eta - integral_scale * sum_i integral C_i(w, M T_r) x_i(w) dw."""
    names = model.names
    total = 0j
    numeric = []
    for i, name in enumerate(names):
        spec = spectra[name]
        if spec.is_zero:
            continue
        if fast_poissonian and isinstance(spec.shape, Poissonian):
            value, _ = poissonian_integral(model, spec.shape.g, cfg, r, i, spec.shape.amplitude)
            total += value
        else:
            numeric.append(i)
    if numeric:
        parts = integral_components(model, spectra, cfg, r)
        total += np.sum(parts[numeric])
    return complex(model.eta - model.integral_scale * total)


def simulate_records(models, spectra, cfg, path="integral", threads=1, fast_poissonian=False):
    """Records [set, round] for rounds r = 1..N, evaluated in a thread pool.

    Each record is computed independently and collected in input order, so
    the result does not depend on the number of threads.
    """
    jobs = [(s, r) for s in range(len(models)) for r in range(1, cfg.N + 1)]

    def one(job):
        s, r = job
        if path == "comb":
            return comb_record(models[s], spectra, cfg, r)
        if path == "integral":
            return integral_record(models[s], spectra, cfg, r, fast_poissonian)
        raise ValueError(f"unknown record path {path!r}")

    if threads <= 1:
        values = [one(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(one, jobs))
    return np.array(values, dtype=complex).reshape(len(models), cfg.N)


# per-scenario entry points

def measure_qutrit(spectra, obs, rho, cfg, r, fast_poissonian=False):
    return integral_record(build_qutrit_model(MeasurementSet(obs, rho)), spectra, cfg, r,
                           fast_poissonian)


def comb_qutrit(spectra, obs, rho, cfg, r):
    return comb_record(build_qutrit_model(MeasurementSet(obs, rho)), spectra, cfg, r)


def _rw_sequence(d, sequence):
    return sequence or cyclic_sequence(d)


def measure_rw(spectra, obs, rho, cfg, r, d=4, sequence=None, fast_poissonian=False):
    model = build_rw_model(d, MeasurementSet(obs, rho), _rw_sequence(d, sequence))
    return integral_record(model, spectra, cfg, r, fast_poissonian)


def comb_rw(spectra, obs, rho, cfg, r, d=4, sequence=None):
    model = build_rw_model(d, MeasurementSet(obs, rho), _rw_sequence(d, sequence))
    return comb_record(model, spectra, cfg, r)


def measure_antimony(spectra, obs, rho, cfg, r, params=None, fast_poissonian=False):
    model = build_antimony_model(8, MeasurementSet(obs, rho), antimony_sequence(),
                                 params or AntimonyParams())
    return integral_record(model, spectra, cfg, r, fast_poissonian)


def comb_antimony(spectra, obs, rho, cfg, r, params=None):
    model = build_antimony_model(8, MeasurementSet(obs, rho), antimony_sequence(),
                                 params or AntimonyParams())
    return comb_record(model, spectra, cfg, r)


# measured-record files

RECORD_HEADER = ("set_index", "round_r", "value_re", "value_im")


def write_records(path, records):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_HEADER)
        for s, row in enumerate(records):
            for r, value in enumerate(row, start=1):
                writer.writerow((s, r, repr(float(value.real)), repr(float(value.imag))))


def read_records(path, n_sets, n_rounds):
    records = np.full((n_sets, n_rounds), np.nan + 0j)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RECORD_HEADER:
            raise ConfigurationError(f"record file must have header {','.join(RECORD_HEADER)}")
        count = 0
        for row in reader:
            s, r = int(row["set_index"]), int(row["round_r"])
            if not (0 <= s < n_sets and 1 <= r <= n_rounds):
                raise ConfigurationError(f"record ({s}, {r}) outside {n_sets} sets x {n_rounds} rounds")
            records[s, r - 1] = complex(float(row["value_re"]), float(row["value_im"]))
            count += 1
    if count != n_sets * n_rounds or np.isnan(records.real).any():
        raise ConfigurationError(
            f"expected {n_sets * n_rounds} records ({n_sets} sets x {n_rounds} rounds), got {count}")
    return records
