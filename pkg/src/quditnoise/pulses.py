"""
Resonant transposition pulses, reference sequences and switching functions.

A switching table records, for every interval of a reference sequence, how
the interval's pulse conjugation redistributes each Weyl operator over the
Weyl basis.  Closed forms are provided next to a brute-force conjugation
oracle so that they can be checked against each other.
"""

from dataclasses import dataclass
from fractions import Fraction
import warnings

import numpy as np

from .weyl_algebra import check_dim, weyl_decompose, weyl_operator, xi_power


class ConfigurationError(ValueError):
    """Raised for inconsistent scenario or sequence settings."""


@dataclass(frozen=True)
class ResonantPulse:
    i: int
    j: int

    def validate(self, d):
        if not (0 <= self.i < d and 0 <= self.j < d):
            raise ValueError(f"pulse levels ({self.i}, {self.j}) outside Z_{d}")
        if self.i == self.j:
            raise ValueError(f"pulse needs two distinct levels, got ({self.i}, {self.j})")


@dataclass(frozen=True)
class PulseSequence:
    """Ordered pulses; pulse k opens the interval starting at ``boundaries[k]``.

    Boundaries are exact fractions of the period T/r.
    """

    pulses: tuple
    boundaries: tuple

    def __post_init__(self):
        pulses = tuple(p if isinstance(p, ResonantPulse) else ResonantPulse(*p) for p in self.pulses)
        bounds = tuple(Fraction(b) for b in self.boundaries)
        object.__setattr__(self, "pulses", pulses)
        object.__setattr__(self, "boundaries", bounds)
        if not pulses:
            raise ConfigurationError("a pulse sequence needs at least one pulse")
        if len(pulses) != len(bounds):
            raise ConfigurationError(
                f"{len(pulses)} pulses but {len(bounds)} interval boundaries")
        if bounds[0] != 0:
            raise ConfigurationError("the first interval must start at 0")
        if any(b1 >= b2 for b1, b2 in zip(bounds, bounds[1:])) or bounds[-1] >= 1:
            raise ConfigurationError("boundaries must increase strictly inside [0, 1)")

    @property
    def n_intervals(self):
        return len(self.pulses)

    def breakpoints(self):
        """Interval edges as fractions of the period, including the final 1."""
        return self.boundaries + (Fraction(1),)

    def validate(self, d):
        for pulse in self.pulses:
            pulse.validate(d)
        last = self.pulses[-1]
        first = self.pulses[0]
        if last.j != first.i:
            warnings.warn("pulse sequence does not close back onto its first level", stacklevel=2)


def qutrit_sequence():
    """Three-interval qutrit sequence with boundaries 0, 1/7, 2/5."""
    return PulseSequence(((0, 1), (1, 2), (2, 0)),
                         (Fraction(0), Fraction(1, 7), Fraction(2, 5)))


def qutrit_inverting_sequence():
    """Cyclic rotation of :func:`qutrit_sequence` whose pulses reproduce the
    interval values 1, xi^-a, xi^a of the special qutrit table."""
    return PulseSequence(((1, 2), (2, 0), (0, 1)),
                         (Fraction(0), Fraction(1, 7), Fraction(2, 5)))


def cyclic_sequence(d):
    """Pulses (k, k+1) on equal intervals k/d."""
    check_dim(d)
    return PulseSequence(tuple((k, (k + 1) % d) for k in range(d)),
                         tuple(Fraction(k, d) for k in range(d)))


def antimony_sequence():
    """Eight-level sequence visiting 0,4,5,3,6,1,7,2 on equal intervals."""
    levels = (0, 4, 5, 3, 6, 1, 7, 2)
    pulses = tuple((levels[k], levels[(k + 1) % 8]) for k in range(8))
    return PulseSequence(pulses, tuple(Fraction(k, 8) for k in range(8)))


SEQUENCE_PRESETS = {
    "qutrit": lambda d: qutrit_sequence(),
    "qutrit-inverting": lambda d: qutrit_inverting_sequence(),
    "cyclic": cyclic_sequence,
    "antimony": lambda d: antimony_sequence(),
}


def pulse_matrix(d, pulse):
    """|i><j| + |j><i| + 1 - |i><i| - |j><j|."""
    check_dim(d)
    pulse = pulse if isinstance(pulse, ResonantPulse) else ResonantPulse(*pulse)
    pulse.validate(d)
    p = np.eye(d, dtype=complex)
    p[pulse.i, pulse.i] = p[pulse.j, pulse.j] = 0.0
    p[pulse.i, pulse.j] = p[pulse.j, pulse.i] = 1.0
    return p


def conjugate_weyl_oracle(d, pulse, a, b):
    """Weyl coefficients of P^-1 Z^a X^b P by direct matrix products."""
    p = pulse_matrix(d, pulse)
    return weyl_decompose(np.linalg.inv(p) @ weyl_operator(d, a, b) @ p)


def switching_full(d, pulse, a, b):
    """Closed-form coefficients y[a', b'] of P^-1 Z^a X^b P.

    The six target shifts b' in {0, i-j, j-i, i-j+b, j-i+b, b} may coincide
    mod d; colliding branches are accumulated.  The ``link`` factor collects
    the products in which the pulse matrix elements meet each other, including
    the b = 0 overlaps.
    """
    check_dim(d)
    pulse = pulse if isinstance(pulse, ResonantPulse) else ResonantPulse(*pulse)
    pulse.validate(d)
    i, j = pulse.i, pulse.j
    a, b = a % d, b % d
    ap = np.arange(d)
    y = np.zeros((d, d), dtype=complex)

    def xi(k):
        return xi_power(d, k)

    link = ((j == (i + b) % d) * xi(a * j) + (i == (j + b) % d) * xi(a * i)
            - (b == 0) * (xi(a * i) + xi(a * j)))
    y[:, 0] += -(xi(-ap * i) + xi(-ap * j)) * link / d
    y[:, (i - j) % d] += xi(-ap * i) * link / d
    y[:, (j - i) % d] += xi(-ap * j) * link / d
    y[:, (i - j + b) % d] += (xi((a - ap) * (i + b)) + xi(-ap * i + a * j)) / d
    y[:, (j - i + b) % d] += (xi((a - ap) * (j + b)) + xi(-ap * j + a * i)) / d
    y[:, b] += (-(xi((a - ap) * i) + xi((a - ap) * j)) * (xi((a - ap) * b) + 1)
                + d * (ap == a)) / d
    return y


def switching_reduced(d, pulse, a):
    """y[m] = delta_{m,a} + (xi^{-mj} - xi^{-mi})(xi^{ai} - xi^{aj}) / d."""
    check_dim(d)
    pulse = pulse if isinstance(pulse, ResonantPulse) else ResonantPulse(*pulse)
    pulse.validate(d)
    i, j = pulse.i, pulse.j
    m = np.arange(d)
    y = (m == a % d).astype(complex)
    y += (xi_power(d, -m * j) - xi_power(d, -m * i)) * (xi_power(d, a * i) - xi_power(d, a * j)) / d
    return y


def switching_qutrit(interval, a):
    """Qutrit special-case switching value on interval 1, 2 or 3."""
    if interval == 1:
        return complex(1.0)
    if interval == 2:
        return complex(xi_power(3, -a))
    if interval == 3:
        return complex(xi_power(3, a))
    raise ValueError(f"qutrit interval must be 1, 2 or 3, got {interval!r}")


BASIS_KINDS = ("W", "RW", "QutritSpecial")


@dataclass(frozen=True)
class SwitchingTable:
    """Per-interval switching coefficients.

    ``values`` layout depends on ``kind``:

    * ``"W"``: ``[h, a, b, a2, b2]``, the coefficient of Z^a2 X^b2 in the
      conjugated Z^a X^b during interval h.
    * ``"RW"``: ``[h, a, m]``, the coefficient of Z^m in the conjugated Z^a.
    * ``"QutritSpecial"``: ``[h, a]``, the factor multiplying beta_a while it
      couples to Z^-a.
    """

    d: int
    kind: str
    sequence: PulseSequence
    values: np.ndarray

    @property
    def n_intervals(self):
        return self.values.shape[0]


def build_switching_table(d, sequence, kind):
    check_dim(d)
    if kind not in BASIS_KINDS:
        raise ConfigurationError(f"unknown basis kind {kind!r}")
    sequence.validate(d)
    if kind == "QutritSpecial":
        if d != 3 or sequence.boundaries != qutrit_sequence().boundaries \
                or sequence.n_intervals != 3:
            raise ConfigurationError(
                "the special qutrit table needs d=3 and the three-interval qutrit sequence")
        values = np.array([[switching_qutrit(h + 1, a) for a in range(3)] for h in range(3)])
    elif kind == "RW":
        values = np.array([[switching_reduced(d, p, a) for a in range(d)]
                           for p in sequence.pulses])
    else:
        values = np.array([[[switching_full(d, p, a, b) for b in range(d)] for a in range(d)]
                           for p in sequence.pulses])
    values.setflags(write=False)
    return SwitchingTable(d=d, kind=kind, sequence=sequence, values=values)


def effective_hamiltonian_check(d, sequence, beta, interval):
    """Max deviation between P^-1 H P and its switching-table expansion.

    ``beta`` holds static Weyl coefficients ``[a, b]`` of H.
    """
    beta = np.asarray(beta, dtype=complex)
    table = build_switching_table(d, sequence, "W")
    pulse = sequence.pulses[interval]
    p = pulse_matrix(d, pulse)
    hamiltonian = np.einsum("ab,abij->ij", beta,
                            np.array([[weyl_operator(d, a, b) for b in range(d)] for a in range(d)]))
    direct = np.linalg.inv(p) @ hamiltonian @ p
    mixed = np.einsum("ab,abxy->xy", beta, table.values[interval])
    expanded = sum(mixed[a2, b2] * weyl_operator(d, a2, b2) for a2 in range(d) for b2 in range(d))
    return float(np.max(np.abs(direct - expanded)))
