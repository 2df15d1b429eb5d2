"""
Filter functions of piecewise-constant switching functions.

A switching function that is constant on the intervals of one period T_r has
the bounded Fourier transform

    F(w, T_r) = sum_h y_h * integral_{t_h}^{t_{h+1}} exp(i w t) dt,

evaluated in closed form.  Repeating the period M times multiplies F by a
geometric factor.  All evaluators broadcast over an array of frequencies and
over trailing switching-value dimensions.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

COMB_THRESHOLD = 1e-9


def _times(breakpoints, period):
    """Interval edges in time units from exact period fractions."""
    return np.array([float(f) for f in breakpoints]) * period


def interval_integrals(omega, breakpoints, period):
    """Array ``[w, h]`` of integral_{t_h}^{t_{h+1}} exp(i w t) dt.

    Written as width * sinc * exp(i w midpoint), which equals
    -i/w (e^{i w t_{h+1}} - e^{i w t_h}) but has no cancellation at small w
    and reduces to the interval width at w = 0.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    t = _times(breakpoints, period)
    width = np.diff(t)[None, :]
    mid = 0.5 * (t[1:] + t[:-1])[None, :]
    w = omega[:, None]
    return width * np.sinc(w * width / (2.0 * np.pi)) * np.exp(1j * w * mid)


def comb_factor(omega, period, reps):
    """(1 - exp(i w M T_r)) / (1 - exp(i w T_r)), equal to M on comb teeth.

    Evaluated as exp(i w (M-1) T_r / 2) sin(M w T_r / 2) / sin(w T_r / 2).
    When |1 - exp(i w T_r)| drops below COMB_THRESHOLD the ratio of sines is
    replaced by its limit, keeping the phase of the offset from the tooth.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    half = 0.5 * omega * period
    denom = np.sin(half)
    on_tooth = 2.0 * np.abs(denom) < COMB_THRESHOLD
    safe = np.where(on_tooth, 1.0, denom)
    factor = np.exp(1j * half * (reps - 1)) * np.sin(reps * half) / safe
    offset = half - np.pi * np.round(half / np.pi)
    limit = reps * np.exp(1j * offset * (reps - 1))
    return np.where(on_tooth, limit, factor)


def comb_kernel(omega, period, reps):
    """|comb_factor|^2 = sin^2(M w T_r / 2) / sin^2(w T_r / 2)."""
    return np.abs(comb_factor(omega, period, reps)) ** 2


def filter_values(y, breakpoints, period, omega, reps=1):
    """Filter functions for switching values ``y[h, ...]``.

    Returns an array of shape ``(len(omega),) + y.shape[1:]``.
    """
    y = np.asarray(y, dtype=complex)
    phi = interval_integrals(omega, breakpoints, period)
    flat = y.reshape(y.shape[0], -1)
    values = (phi @ flat).reshape((phi.shape[0],) + y.shape[1:])
    if reps != 1:
        factor = comb_factor(omega, period, reps)
        values = values * factor.reshape((-1,) + (1,) * (values.ndim - 1))
    return values


def table_column(table, source_index):
    """Per-interval switching values ``y[h]`` for one table source index.

    ``source_index`` is ``a`` for the special qutrit table, ``(a, m)`` (source
    a, target m) for a reduced table and ``(a, b, a2, b2)`` for a full table.
    """
    d = table.d
    if table.kind == "QutritSpecial":
        return table.values[:, int(source_index) % d]
    index = tuple(int(s) % d for s in source_index)
    expected = 2 if table.kind == "RW" else 4
    if len(index) != expected:
        raise ValueError(f"{table.kind} tables take {expected} indices, got {source_index!r}")
    return table.values[(slice(None),) + index]


@dataclass(frozen=True)
class FilterRequest:
    omega: float
    period: float
    reps: int
    table: object
    source_index: object

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("period must be positive")
        if int(self.reps) != self.reps or self.reps < 1:
            raise ValueError("reps must be a positive integer")

    def values(self):
        return table_column(self.table, self.source_index)

    def breakpoints(self):
        return self.table.sequence.breakpoints()


def filter_single(req):
    """F(w, T_r) for one period; w = 0 returns sum_h y_h (t_{h+1} - t_h)."""
    return complex(filter_values(req.values(), req.breakpoints(), req.period, [req.omega])[0])


def filter_repeated(req):
    """F(w, M T_r) via the geometric comb factor."""
    return complex(filter_values(req.values(), req.breakpoints(), req.period,
                                 [req.omega], reps=req.reps)[0])


def filter_repeated_direct(req):
    """Brute-force sum over the M shifted copies of one period."""
    base = filter_single(req)
    shifts = np.exp(1j * req.omega * req.period * np.arange(req.reps))
    return complex(np.sum(shifts) * base)


def filter_quadrature(y, breakpoints, period, omega, nodes=48):
    """Reference F(w, T_r) by composite Gauss-Legendre quadrature.

    Every switching interval is cut into panels spanning at most 4 radians of
    phase at the largest requested |w|, each integrated with ``nodes`` points.
    """
    x, wts = leggauss(nodes)
    t = _times(breakpoints, period)
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    w_max = float(np.max(np.abs(omega))) if omega.size else 0.0
    total = np.zeros(omega.size, dtype=complex)
    for h in range(t.size - 1):
        panels = max(1, int(np.ceil(w_max * (t[h + 1] - t[h]) / 4.0)))
        edges = np.linspace(t[h], t[h + 1], panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        samples = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        weights = (half[:, None] * wts[None, :]).ravel()
        total += y[h] * (np.exp(1j * omega[:, None] * samples[None, :]) @ weights)
    return total


def conjugate_index(table, source_index):
    """Negated source index and the phase xi^{a2 b2 - a b} relating the pair."""
    from .weyl_algebra import xi_power

    d = table.d
    if table.kind == "QutritSpecial":
        return (-int(source_index)) % d, 1.0
    index = tuple(int(s) % d for s in source_index)
    negated = tuple((-s) % d for s in index)
    if table.kind == "RW":
        return negated, 1.0
    a, b, a2, b2 = index
    return negated, complex(xi_power(d, a2 * b2 - a * b))


def filter_conjugate_check(req):
    """|conj(F_{-A})(w) - F_A(-w) xi^{...}| for the request's source index."""
    negated, phase = conjugate_index(req.table, req.source_index)
    bp = req.breakpoints()
    y_neg = table_column(req.table, negated)
    lhs = np.conj(filter_values(y_neg, bp, req.period, [req.omega], reps=req.reps))
    rhs = filter_values(req.values(), bp, req.period, [-req.omega], reps=req.reps) * phase
    return float(np.abs(lhs - rhs)[0])
