"""
Real spectral functions with declared parity and their assembly into the
complex polyspectra of each scenario.

Each shape is defined on omega >= 0 and mirrored to negative frequencies by
its parity.  The value at exactly omega = 0 is forced to zero because no
noise spectrum is attributed to zero frequency.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .pulses import ConfigurationError


class Parity(Enum):
    EVEN = 1
    ODD = -1


@dataclass(frozen=True)
class Poissonian:
    """amplitude * w^2 * exp(-g |w|)."""

    g: float
    amplitude: float = 1.0

    def positive(self, w):
        return self.amplitude * w**2 * np.exp(-self.g * w)

    def kinks(self):
        return ()


@dataclass(frozen=True)
class GaussianBumps:
    """Sum of amplitude * exp(-width (w - center)^2) over ``bumps``."""

    bumps: tuple

    def __post_init__(self):
        object.__setattr__(self, "bumps", tuple(tuple(float(v) for v in b) for b in self.bumps))
        if any(len(b) != 3 for b in self.bumps):
            raise ConfigurationError("each Gaussian bump needs (amplitude, center, width)")

    def positive(self, w):
        total = np.zeros_like(w)
        for amplitude, center, width in self.bumps:
            total = total + amplitude * np.exp(-width * (w - center) ** 2)
        return total

    def kinks(self):
        return ()


@dataclass(frozen=True)
class Rational:
    """amplitude / (1 + |w - center|)."""

    amplitude: float
    center: float

    def positive(self, w):
        return self.amplitude / (1.0 + np.abs(w - self.center))

    def kinks(self):
        return (self.center,)


@dataclass(frozen=True)
class Tabulated:
    """Linear interpolation on a non-negative grid, zero beyond its end."""

    omega: tuple
    values: tuple

    def __post_init__(self):
        grid = np.asarray(self.omega, dtype=float)
        if grid.ndim != 1 or grid.size != len(self.values) or grid.size < 2:
            raise ConfigurationError("tabulated spectrum needs matching grids of length >= 2")
        if np.any(np.diff(grid) <= 0) or grid[0] < 0:
            raise ConfigurationError("tabulated grid must be non-negative and increasing")
        object.__setattr__(self, "omega", tuple(float(v) for v in grid))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def positive(self, w):
        return np.interp(w, self.omega, self.values, left=self.values[0], right=0.0) \
            * (w <= self.omega[-1])

    def kinks(self):
        return self.omega


@dataclass(frozen=True)
class Zero:
    def positive(self, w):
        return np.zeros_like(w)

    def kinks(self):
        return ()


@dataclass(frozen=True)
class RealSpectrum:
    shape: object
    parity: Parity = Parity.EVEN

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        mag = np.abs(w)
        value = self.shape.positive(mag)
        if self.parity is Parity.ODD:
            value = np.sign(w) * value
        return np.where(w == 0.0, 0.0, value)

    @property
    def is_zero(self):
        return isinstance(self.shape, Zero)

    def kinks(self):
        return tuple(self.shape.kinks())


def eval_spectrum(spectrum, omega):
    return spectrum(omega)


SCENARIOS = ("qutrit-rw", "qudit-rw", "antimony-w")

# component name -> parity, for every real function of a scenario
SCENARIO_COMPONENTS = {
    "qutrit-rw": {"R1": Parity.EVEN, "I1": Parity.EVEN, "E": Parity.EVEN, "D": Parity.ODD},
    "qudit-rw": {"R": Parity.EVEN, "I": Parity.ODD},
    "antimony-w": {"R0": Parity.EVEN, "R0p": Parity.EVEN, "R1": Parity.EVEN, "I1": Parity.ODD},
}

# the components that the inversion can recover, in unknown-vector order
RECONSTRUCTED = {
    "qutrit-rw": ("R1", "I1", "E"),
    "qudit-rw": ("R",),
    "antimony-w": ("R0", "R0p", "R1"),
}


@dataclass(frozen=True)
class ScenarioSpectra:
    scenario: str
    components: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIO_COMPONENTS:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}")
        expected = SCENARIO_COMPONENTS[self.scenario]
        unknown = set(self.components) - set(expected)
        if unknown:
            raise ConfigurationError(
                f"components {sorted(unknown)} do not belong to scenario {self.scenario}")
        filled = {}
        for name, parity in expected.items():
            spec = self.components.get(name, RealSpectrum(Zero(), parity))
            if spec.parity is not parity:
                raise ConfigurationError(
                    f"{name} must be {parity.name.lower()} in scenario {self.scenario}")
            filled[name] = spec
        object.__setattr__(self, "components", filled)

    def __getitem__(self, name):
        return self.components[name]

    def reconstructed_names(self):
        return RECONSTRUCTED[self.scenario]

    def kinks(self):
        out = set()
        for spec in self.components.values():
            out.update(abs(k) for k in spec.kinks())
        return tuple(sorted(out))


def assemble_polyspectra(spectra, omega):
    """Complex polyspectra keyed by canonical index tuples.

    qutrit-rw keys are (a, b) with -1 stored as 2; qudit-rw has the single key
    ``()``; antimony-w keys are the noise-process pairs (i, i2), i in {0, 1, 2}.
    """
    c = {name: spec(omega) for name, spec in spectra.components.items()}
    if spectra.scenario == "qutrit-rw":
        return {
            (1, 1): c["R1"] + 1j * c["I1"],
            (2, 2): c["R1"] - 1j * c["I1"],
            (1, 2): c["E"] + c["D"],
            (2, 1): c["E"] - c["D"],
        }
    if spectra.scenario == "qudit-rw":
        return {(): c["R"] + 1j * c["I"]}
    zero = np.zeros_like(np.asarray(c["R0"], dtype=complex))
    out = {
        (0, 0): c["R0"] + 0j,
        (1, 1): c["R0p"] + 0j,
        (0, 1): c["R1"] + 1j * c["I1"],
        (1, 0): c["R1"] - 1j * c["I1"],
    }
    for pair in ((2, 2), (0, 2), (2, 0), (1, 2), (2, 1)):
        out[pair] = zero
    return out
