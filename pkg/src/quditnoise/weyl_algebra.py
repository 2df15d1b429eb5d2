"""
Generalized Pauli (Weyl) operators on Z_d and related coefficient maps.

Weyl coefficients are stored as dense ``(d, d)`` complex arrays indexed
``[a, b]`` for the operator ``Z^a X^b``; all indices are canonical in
``{0, ..., d-1}`` and negation is ``a -> (d - a) % d``.
"""

from dataclasses import dataclass

import numpy as np


def root_of_unity(d):
    """Return exp(2*pi*i/d)."""
    check_dim(d)
    return np.exp(2j * np.pi / d)


def xi_power(d, k):
    """Return xi**k with the exponent reduced mod d (exact on integer grids)."""
    k = np.asarray(k) % d
    return np.exp(2j * np.pi * k / d)


def check_dim(d):
    if int(d) != d or d < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {d!r}")


def canonical(index, d):
    return int(index) % d


def negate(index, d):
    return (-int(index)) % d


def from_symmetric(index, d):
    """Map symmetric notation (e.g. -1 for a qutrit) to the canonical range."""
    return int(index) % d


def to_symmetric(index, d):
    """Map a canonical index to {-(d-1)//2, ..., d//2}."""
    index = int(index) % d
    return index - d if index > d // 2 else index


def clock_matrix(d):
    return np.diag(xi_power(d, np.arange(d))).astype(complex)


def shift_matrix(d):
    """X with X|i> = |i+1 mod d>."""
    x = np.zeros((d, d), dtype=complex)
    x[(np.arange(d) + 1) % d, np.arange(d)] = 1.0
    return x


def weyl_operator(d, a, b):
    """Dense matrix of Z^a X^b."""
    check_dim(d)
    a, b = canonical(a, d), canonical(b, d)
    z = np.linalg.matrix_power(clock_matrix(d), a)
    x = np.linalg.matrix_power(shift_matrix(d), b)
    return z @ x


def weyl_basis(d):
    """Array of shape (d, d, d, d): ``basis[a, b]`` is Z^a X^b."""
    basis = np.empty((d, d, d, d), dtype=complex)
    for a in range(d):
        for b in range(d):
            basis[a, b] = weyl_operator(d, a, b)
    return basis


def _check_square(m):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    check_dim(m.shape[0])
    return m


def weyl_decompose(m):
    """Coefficients c[a, b] = tr(X^-b Z^-a m) / d."""
    m = _check_square(m)
    d = m.shape[0]
    basis = weyl_basis(d)
    # tr(W^dagger m) for unitary W = Z^a X^b
    return np.einsum("abij,ij->ab", basis.conj(), m) / d


def weyl_reconstruct(coefficients):
    """Sum of c[a, b] Z^a X^b."""
    c = _check_square(coefficients)
    return np.einsum("ab,abij->ij", c, weyl_basis(c.shape[0]))


def hermitian_partner(coefficients):
    """Return xi^{-ab} conj(c[-a, -b]); equals c for Hermitian sources."""
    c = _check_square(coefficients)
    d = c.shape[0]
    a, b = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    return xi_power(d, -a * b) * np.conj(c[(-a) % d, (-b) % d])


@dataclass(frozen=True)
class SpinOperators:
    ix: np.ndarray
    iy: np.ndarray
    iz: np.ndarray

    @property
    def spin(self):
        return (self.iz.shape[0] - 1) / 2


def spin_operators(d):
    """Spin-(d-1)/2 matrices in the basis |p>, p = 0..d-1, with hbar = 1."""
    check_dim(d)
    spin = (d - 1) / 2
    p = np.arange(d)
    iz = np.diag(spin - p).astype(complex)
    ix = np.zeros((d, d), dtype=complex)
    iy = np.zeros((d, d), dtype=complex)
    for row in range(d):
        for col in range(d):
            lower = row == col + 1
            upper = row + 1 == col
            if not (lower or upper):
                continue
            amp = 0.5 * np.sqrt((spin + 1) * (row + col + 1) - (row + 1) * (col + 1))
            ix[row, col] = amp
            iy[row, col] = 1j * amp if lower else -1j * amp
    return SpinOperators(ix=ix, iy=iy, iz=iz)


def beta_from_energies(eps):
    """beta_ab = (1/d) sum_ij xi^{-ai} delta_{b, i-j} eps_ij."""
    eps = _check_square(eps)
    d = eps.shape[0]
    beta = np.zeros((d, d), dtype=complex)
    rows = np.arange(d)
    for b in range(d):
        # entries eps[i, i - b]
        band = eps[rows, (rows - b) % d]
        for a in range(d):
            beta[a, b] = np.sum(xi_power(d, -a * rows) * band) / d
    return beta


def energies_from_beta(coefficients):
    """eps_nm = sum_ab xi^{an} delta_{n, m+b} beta_ab."""
    c = _check_square(coefficients)
    d = c.shape[0]
    eps = np.zeros((d, d), dtype=complex)
    for n in range(d):
        for m in range(d):
            b = (n - m) % d
            eps[n, m] = np.sum(xi_power(d, np.arange(d) * n) * c[:, b])
    return eps


def total_spectrum(d, basis_kind, spectra):
    """Total detected noise spectrum at one frequency.

    ``spectra`` maps index tuples to complex values: ``(a, a2)`` for the
    reduced basis (``basis_kind="RW"``), ``(a, b, a2, b2)`` for the full
    Weyl basis (``basis_kind="W"``).
    """
    check_dim(d)
    S = range(d)
    total = 0j
    if basis_kind == "RW":
        for a in S:
            for a2 in S:
                value = _lookup(spectra, (a, a2))
                phase = sum(xi_power(d, a * m + a2 * m2) for m in S for m2 in S)
                total += phase * value
        return complex(total)
    if basis_kind == "W":
        for m in S:
            for n in S:
                for m2 in S:
                    for n2 in S:
                        for a in S:
                            for a2 in S:
                                key = (a, (n - m) % d, a2, (n2 - m2) % d)
                                total += xi_power(d, a * m + a2 * m2) * _lookup(spectra, key)
        return complex(total)
    raise ValueError(f"unknown basis kind {basis_kind!r}; expected 'W' or 'RW'")


def _lookup(spectra, key):
    try:
        return spectra[key]
    except KeyError:
        raise ValueError(f"missing spectrum entry for index {key}") from None
