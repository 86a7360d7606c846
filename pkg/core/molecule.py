"""
Two-transmon artificial molecule: Hamiltonian, eigenstructure and
port-resolved transition dipoles.

All frequencies are angular (rad/s). Waveguide S drives b1 + b2 + h.c.,
waveguide A drives b1 - b2 + h.c.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import constants
from .exceptions import DegeneracyWarning, InvalidParameterError

logger = logging.getLogger(__name__)

DEGENERACY_TOLERANCE = constants.to_angular(1e3)
PARITY_TOLERANCE = 1e-9
DIPOLE_ZERO = 1e-9

EVEN, ODD, NONE = 'even', 'odd', 'none'


@dataclass(frozen=True)
class MoleculeParams:
    """
    Duffing-oscillator parameters of the two transmons.

    omega1, omega2, alpha1, alpha2 and g are angular frequencies; alpha is
    negative for transmons.
    """
    omega1: float
    omega2: float
    alpha1: float
    alpha2: float
    g: float
    n_levels: int = constants.N_LEVELS

    def __post_init__(self):
        if isinstance(self.n_levels, bool) or int(self.n_levels) != self.n_levels:
            raise InvalidParameterError(f'n_levels must be an integer, got {self.n_levels!r}')
        if self.n_levels < 2:
            raise InvalidParameterError(f'n_levels must be >= 2, got {self.n_levels}')
        for name in ('omega1', 'omega2', 'alpha1', 'alpha2', 'g'):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameterError(f'{name} must be finite')
        if self.g < 0:
            raise InvalidParameterError(f'g must be >= 0, got {self.g}')

    @property
    def identical(self):
        return self.omega1 == self.omega2 and self.alpha1 == self.alpha2

    @property
    def dimension(self):
        return self.n_levels ** 2

    @classmethod
    def symmetric(cls, omega, alpha, g, n_levels=constants.N_LEVELS):
        return cls(omega, omega, alpha, alpha, g, n_levels)

    @classmethod
    def canonical(cls, n_levels=constants.N_LEVELS):
        """Spectroscopic values of the measured device."""
        return cls.symmetric(
            constants.to_angular(constants.OMEGA_HZ),
            constants.to_angular(constants.ALPHA_HZ),
            constants.to_angular(constants.G_HZ),
            n_levels,
        )


@dataclass(frozen=True)
class EigenSystem:
    energies: np.ndarray
    states: np.ndarray
    symmetry: tuple
    labels: tuple
    manifolds: tuple
    parity: np.ndarray
    n_levels: int

    @property
    def ordering(self):
        return {label: index for index, label in enumerate(self.labels)}

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f'No eigenstate labelled {label!r}') from None

    def energy(self, label):
        return float(self.energies[self.index(label)])

    def state(self, label):
        return self.states[:, self.index(label)]

    def energy_order(self):
        """Indices sorted by energy; equal energies put even before odd."""
        rank = {EVEN: 0, ODD: 1, NONE: 2}
        keys = [
            (round(float(e) / DEGENERACY_TOLERANCE), rank[s], i)
            for i, (e, s) in enumerate(zip(self.energies, self.symmetry))
        ]
        return [key[2] for key in sorted(keys)]


@dataclass(frozen=True)
class DipoleMatrices:
    d_S: np.ndarray
    d_A: np.ndarray
    basis_order: tuple
    unnormalized_S: np.ndarray | None = None
    unnormalized_A: np.ndarray | None = None

    def for_port(self, port, convention='normalized'):
        if port not in constants.PORTS:
            raise InvalidParameterError(f'Unknown port {port!r}')
        if convention == 'unnormalized':
            matrix = self.unnormalized_S if port == 'S' else self.unnormalized_A
            if matrix is None:
                raise InvalidParameterError('Unnormalized convention needs identical transmons')
            return matrix
        return self.d_S if port == 'S' else self.d_A

    def element(self, port, lower, upper, convention='normalized'):
        matrix = self.for_port(port, convention)
        return float(matrix[self.basis_order.index(lower), self.basis_order.index(upper)])


@dataclass(frozen=True)
class Transition:
    lower: str
    upper: str
    frequency: float
    port: str
    amplitude: float

    @property
    def frequency_hz(self):
        return constants.to_cyclic(self.frequency)


@dataclass(frozen=True)
class TransitionTable:
    entries: tuple = field(default_factory=tuple)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def find(self, lower, upper, port=None):
        for entry in self.entries:
            if {entry.lower, entry.upper} == {lower, upper} and port in (None, entry.port):
                return entry
        return None

    def for_port(self, port):
        return [entry for entry in self.entries if entry.port == port]

    def allows(self, lower, upper, port):
        return self.find(lower, upper, port) is not None


def annihilation(n_levels):
    return np.diag(np.sqrt(np.arange(1, n_levels, dtype=float)), 1)


def mode_operators(n_levels):
    """b1 and b2 on the bare product basis |n1, n2> (index n1 * N + n2)."""
    b = annihilation(n_levels)
    eye = np.eye(n_levels)
    return np.kron(b, eye), np.kron(eye, b)


def permutation_operator(n_levels):
    dim = n_levels ** 2
    swap = np.zeros((dim, dim))
    for n1 in range(n_levels):
        for n2 in range(n_levels):
            swap[n2 * n_levels + n1, n1 * n_levels + n2] = 1.0
    return swap


def excitation_numbers(n_levels):
    return np.array([n1 + n2 for n1 in range(n_levels) for n2 in range(n_levels)])


def drive_operator(n_levels, port, relative_sign=None):
    """Bare-basis drive operator of a waveguide: b1 + s*b2 + h.c."""
    if relative_sign is None:
        if port not in constants.PORTS:
            raise InvalidParameterError(f'Unknown port {port!r}')
        relative_sign = 1.0 if port == 'S' else -1.0
    b1, b2 = mode_operators(n_levels)
    b = b1 + relative_sign * b2
    return b + b.T


def build_hamiltonian(params: MoleculeParams):
    """H = sum_i (w_i b_i^+ b_i + a_i/2 b_i^+ b_i^+ b_i b_i) + g (b1^+ b2 + b1 b2^+)."""
    b1, b2 = mode_operators(params.n_levels)
    hamiltonian = (
        params.omega1 * b1.T @ b1
        + params.omega2 * b2.T @ b2
        + 0.5 * params.alpha1 * b1.T @ b1.T @ b1 @ b1
        + 0.5 * params.alpha2 * b2.T @ b2.T @ b2 @ b2
        + params.g * (b1.T @ b2 + b1 @ b2.T)
    )
    return hamiltonian.astype(complex)


def _fix_phase(vector):
    pivot = int(np.argmax(np.abs(vector)))
    return vector * (abs(vector[pivot]) / vector[pivot])


def _symmetry_label(parity):
    if parity > 1.0 - PARITY_TOLERANCE:
        return EVEN
    if parity < -1.0 + PARITY_TOLERANCE:
        return ODD
    return NONE


def _diagonalize_block(block, swap_block, identical):
    values, vectors = np.linalg.eigh(block)
    if not identical:
        return values, vectors
    # Rotate degenerate clusters onto permutation eigenvectors.
    start = 0
    while start < len(values):
        stop = start + 1
        while stop < len(values) and values[stop] - values[start] < DEGENERACY_TOLERANCE:
            stop += 1
        if stop - start > 1:
            sub = vectors[:, start:stop]
            parity_block = sub.conj().T @ swap_block @ sub
            _, rotation = np.linalg.eigh(0.5 * (parity_block + parity_block.conj().T))
            vectors[:, start:stop] = sub @ rotation
            values[start:stop] = np.real(np.diag(
                (sub @ rotation).conj().T @ block @ (sub @ rotation)))
        start = stop
    return values, vectors


def _canonical_labels(manifold, energies, parities):
    order = np.argsort(energies, kind='stable')
    if manifold == 0:
        return {int(order[0]): '0'}
    if manifold == 1 and len(order) == 2:
        odd_first = np.argsort(parities, kind='stable')
        return {int(odd_first[0]): 'a', int(odd_first[1]): 's'}
    if manifold == 2 and len(order) == 3:
        antisymmetric = int(np.argmin(parities))
        rest = [int(i) for i in order if i != antisymmetric]
        return {antisymmetric: '2-', rest[0]: '2+L', rest[1]: '2+U'}
    return {int(i): f'{manifold}:{k}' for k, i in enumerate(order)}


def diagonalize(H, params: MoleculeParams):
    """
    Eigenpairs of the molecule Hamiltonian in canonical order.

    H conserves the total excitation number, so each manifold is
    diagonalized separately. The canonical states (0, a, s, 2-, 2+L, 2+U)
    come first; the rest follow by manifold and energy.
    """
    H = np.asarray(H)
    if np.max(np.abs(H - H.conj().T)) > 1e-6 * max(1.0, np.max(np.abs(H))):
        raise InvalidParameterError('Hamiltonian is not Hermitian')
    real = np.allclose(H.imag, 0.0)
    matrix = H.real if real else H

    n_levels = params.n_levels
    numbers = excitation_numbers(n_levels)
    swap = permutation_operator(n_levels)
    dim = n_levels ** 2

    records = []
    for manifold in range(int(numbers.max()) + 1):
        idx = np.flatnonzero(numbers == manifold)
        block = matrix[np.ix_(idx, idx)]
        values, vectors = _diagonalize_block(block, swap[np.ix_(idx, idx)], params.identical)
        full = np.zeros((dim, len(idx)), dtype=vectors.dtype)
        full[idx, :] = vectors
        parities = np.real(np.einsum('ik,ij,jk->k', full.conj(), swap, full))
        labels = _canonical_labels(manifold, values, parities)
        for k in range(len(idx)):
            records.append((labels[k], manifold, float(values[k]), _fix_phase(full[:, k]), float(parities[k])))

    rank = {label: i for i, label in enumerate(constants.CANONICAL_LABELS)}
    records.sort(key=lambda r: (rank.get(r[0], len(rank)), r[1], r[2]))

    labels = tuple(r[0] for r in records)
    energies = np.array([r[2] for r in records])
    parity = np.array([r[4] for r in records])
    symmetry = tuple(_symmetry_label(p) for p in parity)

    if not params.identical:
        ordered = np.sort(energies)
        close = np.flatnonzero(np.diff(ordered) < DEGENERACY_TOLERANCE)
        if len(close) and NONE in symmetry:
            message = 'Near-degenerate eigenvalues with ambiguous permutation symmetry'
            logger.warning(message)
            warnings.warn(message, DegeneracyWarning, stacklevel=2)

    eigensystem = EigenSystem(
        energies=energies,
        states=np.column_stack([r[3] for r in records]),
        symmetry=symmetry,
        labels=labels,
        manifolds=tuple(r[1] for r in records),
        parity=parity,
        n_levels=n_levels,
    )
    logger.debug(
        'Diagonalized %d-level molecule: %s',
        n_levels,
        ', '.join(f'{l}={constants.to_cyclic(e) / 1e9:.4f} GHz'
                  for l, e in zip(labels[:6], energies[:6])),
    )
    return eigensystem


def closed_form_energies(params: MoleculeParams):
    """Canonical eigenvalues for identical transmons."""
    if not params.identical:
        raise InvalidParameterError('Closed forms need identical transmons')
    omega, alpha, g = params.omega1, params.alpha1, params.g
    root = math.sqrt(16 * g ** 2 + alpha ** 2)
    return {
        '0': 0.0,
        'a': omega - g,
        's': omega + g,
        '2-': 2 * omega + alpha,
        '2+L': 0.5 * (4 * omega + alpha - root),
        '2+U': 0.5 * (4 * omega + alpha + root),
    }


def coupling_coefficients(params: MoleculeParams):
    """Return (c_S-, c_S+, c_A-, c_A+)."""
    if not params.identical:
        raise InvalidParameterError('Coupling coefficients need identical transmons')
    if params.g == 0:
        raise ZeroDivisionError('Coupling coefficients are undefined for g = 0')
    alpha, g = params.alpha1, params.g
    root = math.sqrt(alpha ** 2 + 16 * g ** 2)
    scale = math.sqrt(2) * g
    return (
        (-alpha - root + 4 * g) / scale,
        (-alpha + root + 4 * g) / scale,
        (alpha - root + 4 * g) / scale,
        (alpha + root + 4 * g) / scale,
    )


def unnormalized_compositions(params: MoleculeParams):
    """Unnormalized bare-state compositions of the six canonical states."""
    if not params.identical:
        raise InvalidParameterError('Compositions need identical transmons')
    if params.n_levels < 3:
        raise InvalidParameterError('Compositions need n_levels >= 3')
    n = params.n_levels
    alpha, g = params.alpha1, params.g

    def ket(n1, n2):
        vector = np.zeros(n * n)
        vector[n1 * n + n2] = 1.0
        return vector

    root = math.sqrt(16 * g ** 2 + alpha ** 2)
    if g == 0:
        lower_mix, upper_mix = 0.0, 0.0
    else:
        lower_mix = (alpha + root) / (2 * math.sqrt(2) * g)
        upper_mix = math.sqrt(2) * (alpha - root) / (4 * g)
    return {
        '0': ket(0, 0),
        'a': ket(1, 0) - ket(0, 1),
        's': ket(1, 0) + ket(0, 1),
        '2-': ket(2, 0) - ket(0, 2),
        '2+L': ket(2, 0) + ket(0, 2) - lower_mix * ket(1, 1),
        '2+U': ket(2, 0) + ket(0, 2) - upper_mix * ket(1, 1),
    }


def dipole_matrices(eigensys: EigenSystem, params: MoleculeParams):
    """
    Matrix elements of the S and A drive operators between the canonical
    states, with normalized eigenvectors and, for identical transmons, in
    the convention of unnormalized compositions.
    """
    if params.n_levels < 3:
        raise InvalidParameterError('Dipole matrices need n_levels >= 3')
    labels = tuple(label for label in eigensys.labels if label in constants.CANONICAL_LABELS)
    columns = [eigensys.index(label) for label in labels]
    vectors = eigensys.states[:, columns]

    matrices = []
    for port in constants.PORTS:
        operator = drive_operator(params.n_levels, port)
        element = np.real(vectors.conj().T @ operator @ vectors)
        element = 0.5 * (element + element.T)
        np.fill_diagonal(element, 0.0)
        matrices.append(element)
    d_S, d_A = matrices

    unnormalized_S = unnormalized_A = None
    if params.identical:
        compositions = unnormalized_compositions(params)
        scale = np.array([np.real(compositions[label] @ vectors[:, k]) for k, label in enumerate(labels)])
        weights = np.outer(scale, scale)
        unnormalized_S, unnormalized_A = d_S * weights, d_A * weights

    return DipoleMatrices(d_S=d_S, d_A=d_A, basis_order=labels, unnormalized_S=unnormalized_S, unnormalized_A=unnormalized_A)


def transition_table(eigensys: EigenSystem, dipoles: DipoleMatrices):
    entries = []
    order = dipoles.basis_order
    for port in constants.PORTS:
        matrix = dipoles.for_port(port)
        for i in range(len(order)):
            for j in range(i + 1, len(order)):
                amplitude = matrix[i, j]
                if abs(amplitude) <= DIPOLE_ZERO:
                    continue
                first, second = order[i], order[j]
                if eigensys.energy(first) > eigensys.energy(second):
                    first, second = second, first
                entries.append(Transition(
                    lower=first,
                    upper=second,
                    frequency=eigensys.energy(second) - eigensys.energy(first),
                    port=port,
                    amplitude=float(amplitude),
                ))
    entries.sort(key=lambda t: (eigensys.manifolds[eigensys.index(t.upper)], t.frequency, t.port))
    return TransitionTable(tuple(entries))


def solve(params: MoleculeParams):
    """Diagonalize and return (eigensystem, dipoles, transitions)."""
    eigensys = diagonalize(build_hamiltonian(params), params)
    dipoles = dipole_matrices(eigensys, params)
    return eigensys, dipoles, transition_table(eigensys, dipoles)
