"""
Lindblad master-equation engine in the canonical eigenbasis of the
molecule: pulse sequences, free decay into the two waveguides, two-time
correlations by the quantum regression theorem and emitted flux.

States are density matrices over the six canonical eigenstates in the
interaction picture, so free decay has no Hamiltonian part. Superoperators
act on row-major vectorized density matrices: vec(A rho B) = (A kron B^T) vec(rho).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import integrate, linalg

from . import constants
from .exceptions import InvalidParameterError, InvalidTransitionError, ToleranceError
from .molecule import MoleculeParams, solve
from .scattering import PortCouplings

logger = logging.getLogger(__name__)

DENSITY_TOLERANCE = 1e-9

REFERENCE_TRANSITION = {'S': ('0', 's'), 'A': ('0', 'a')}
DIRECT_STATE = {'S': 's', 'A': 'a'}
OTHER_PORT = {'S': 'A', 'A': 'S'}


@dataclass(frozen=True)
class MoleculeSystem:
    """Eigenstructure the dynamics run on, truncated to the canonical states."""
    eigensys: object
    dipoles: object
    transitions: object

    @classmethod
    def from_params(cls, params: MoleculeParams | None = None):
        params = params or MoleculeParams.canonical()
        if params.n_levels < 3:
            raise InvalidParameterError('Dynamics need n_levels >= 3')
        return cls(*solve(params))

    @property
    def labels(self):
        return self.dipoles.basis_order

    @property
    def dimension(self):
        return len(self.labels)

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise InvalidTransitionError(f'No canonical state {label!r}') from None

    def ket(self, label):
        vector = np.zeros(self.dimension, dtype=complex)
        vector[self.index(label)] = 1.0
        return vector

    def outer(self, bra_label, ket_label):
        """|bra_label><ket_label|"""
        matrix = np.zeros((self.dimension, self.dimension), dtype=complex)
        matrix[self.index(bra_label), self.index(ket_label)] = 1.0
        return matrix

    def reference_dipole(self, port):
        lower, upper = REFERENCE_TRANSITION[port]
        return abs(self.dipoles.element(port, lower, upper))

    def frequency(self, lower, upper):
        return self.eigensys.energy(upper) - self.eigensys.energy(lower)


_default_system = None


def default_system():
    global _default_system
    if _default_system is None:
        _default_system = MoleculeSystem.from_params()
    return _default_system


@dataclass(eq=False)
class DensityMatrix:
    matrix: np.ndarray
    time: float = 0.0
    labels: tuple = constants.CANONICAL_LABELS
    strict: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.strict:
            self.validate(DENSITY_TOLERANCE)

    def validate(self, tolerance):
        matrix = self.matrix
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] != len(self.labels):
            raise InvalidParameterError(f'Density matrix shape {matrix.shape} does not match labels')
        if not np.allclose(matrix, matrix.conj().T, atol=tolerance):
            raise InvalidParameterError('Density matrix is not Hermitian')
        if abs(np.trace(matrix) - 1.0) > tolerance:
            raise InvalidParameterError(f'Density matrix trace {np.trace(matrix).real:.12f} != 1')
        if np.linalg.eigvalsh(0.5 * (matrix + matrix.conj().T)).min() < -tolerance:
            raise InvalidParameterError('Density matrix has negative eigenvalues')

    @classmethod
    def pure(cls, state, labels=constants.CANONICAL_LABELS, time=0.0):
        """Projector on a label or on a state vector (normalized here)."""
        if isinstance(state, str):
            vector = np.zeros(len(labels), dtype=complex)
            vector[labels.index(state)] = 1.0
        else:
            vector = np.asarray(state, dtype=complex)
            vector = vector / np.linalg.norm(vector)
        return cls(np.outer(vector, vector.conj()), time, tuple(labels))

    def population(self, label):
        k = self.labels.index(label)
        return float(self.matrix[k, k].real)

    def coherence(self, row, column):
        return complex(self.matrix[self.labels.index(row), self.labels.index(column)])


@dataclass(frozen=True)
class Rotation:
    """Instantaneous rotation by ``theta`` on lower<->upper driven through ``port``."""
    lower: str
    upper: str
    port: str
    theta: float
    phase: float = 0.0


@dataclass(frozen=True)
class ShapedDrive:
    """Rabi envelope (rad/s, on the port's reference transition) sampled uniformly over ``duration``."""
    port: str
    envelope: tuple
    carrier: float
    duration: float
    phase: float = 0.0


@dataclass(frozen=True)
class FreeDecay:
    duration: float


Step = Union[Rotation, ShapedDrive, FreeDecay]


@dataclass(frozen=True)
class PulseSequence:
    steps: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'steps', tuple(self.steps))
        for step in self.steps:
            duration = getattr(step, 'duration', 0.0)
            if not duration >= 0:
                raise InvalidParameterError(f'Step duration must be >= 0, got {duration}')
            if isinstance(step, ShapedDrive) and len(step.envelope) < 2:
                raise InvalidParameterError('A shaped drive needs at least two envelope samples')

    def validate(self, system: MoleculeSystem, rwa_window):
        for step in self.steps:
            if isinstance(step, Rotation):
                if not system.transitions.allows(step.lower, step.upper, step.port):
                    raise InvalidTransitionError(
                        f'{step.lower}<->{step.upper} is not driven through port {step.port}')
            elif isinstance(step, ShapedDrive):
                _drive_terms(system, step, rwa_window)

    @property
    def duration(self):
        return sum(getattr(step, 'duration', 0.0) for step in self.steps)


@dataclass(frozen=True)
class DecayChannel:
    upper: str
    lower: str
    port: str
    rate: float


@dataclass(frozen=True)
class EvolveOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    method: str = 'RK45'
    samples_per_step: int = 201
    trace_tolerance: float = 1e-8
    positivity_floor: float = -1e-8
    rwa_window: float = constants.to_angular(50e6)
    decay_overrides: dict | None = None


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    labels: tuple
    events: tuple = ()

    def population(self, label):
        k = self.labels.index(label)
        return self.states[:, k, k].real

    def at(self, k):
        return DensityMatrix(self.states[k], float(self.times[k]), self.labels, strict=False)

    @property
    def final(self):
        return self.at(len(self.times) - 1)


def decay_channels(system: MoleculeSystem, couplings: PortCouplings, overrides=None):
    """
    Decay rate of every transition into each waveguide.

    The bright-port rate of a transition is the measured single-excitation
    rate of that port scaled by the squared dipole ratio to the port's
    reference transition; the same scaling of the cross rate feeds the
    other port. ``overrides`` maps (upper, lower, port) to a rate.
    """
    rates = {}
    for transition in system.transitions:
        port = transition.port
        ratio = (transition.amplitude / system.reference_dipole(port)) ** 2
        state = DIRECT_STATE[port]
        for target, rate in ((port, couplings.direct(state)), (OTHER_PORT[port], couplings.cross(state))):
            key = (transition.upper, transition.lower, target)
            rates[key] = rates.get(key, 0.0) + rate * ratio
    for key, rate in (overrides or {}).items():
        if rate < 0:
            raise InvalidParameterError(f'Decay override {key} must be >= 0')
        rates[tuple(key)] = rate
    return [DecayChannel(upper, lower, port, rate) for (upper, lower, port), rate in rates.items() if rate > 0]


def channel_rate(system, couplings, lower, upper, port, overrides=None):
    for channel in decay_channels(system, couplings, overrides):
        if (channel.upper, channel.lower, channel.port) == (upper, lower, port):
            return channel.rate
    return 0.0


def jump_operators(system: MoleculeSystem, couplings: PortCouplings, overrides=None):
    operators = [
        math.sqrt(channel.rate) * system.outer(channel.lower, channel.upper)
        for channel in decay_channels(system, couplings, overrides)
    ]
    for state in ('s', 'a'):
        dephasing = couplings.dephasing(state)
        if dephasing > 0:
            operators.append(math.sqrt(2 * dephasing) * system.outer(state, state))
    return operators


def output_operator(system: MoleculeSystem, couplings: PortCouplings, lower, upper, port, overrides=None):
    """Output field of one transition into ``port``: sqrt(rate) |lower><upper|."""
    rate = channel_rate(system, couplings, lower, upper, port, overrides)
    return math.sqrt(rate) * system.outer(lower, upper)


def liouvillian(hamiltonian, jump_ops):
    dimension = hamiltonian.shape[0]
    identity = np.eye(dimension)
    superop = -1j * (np.kron(hamiltonian, identity) - np.kron(identity, hamiltonian.T))
    for jump in jump_ops:
        product = jump.conj().T @ jump
        superop += np.kron(jump, jump.conj())
        superop -= 0.5 * (np.kron(product, identity) + np.kron(identity, product.T))
    return superop


def steady_state(superop):
    """Trace-one null vector of a Liouvillian, as a Hermitian matrix."""
    dimension = math.isqrt(superop.shape[0])
    _, _, vh = np.linalg.svd(superop)
    rho = vh[-1].conj().reshape(dimension, dimension)
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)


def rotation_unitary(system: MoleculeSystem, lower, upper, theta, phase=0.0):
    """|lower> -> cos(theta/2)|lower> + e^{i phase} sin(theta/2)|upper>; other states untouched."""
    unitary = np.eye(system.dimension, dtype=complex)
    i, j = system.index(lower), system.index(upper)
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    unitary[i, i] = c
    unitary[j, j] = c
    unitary[j, i] = s * np.exp(1j * phase)
    unitary[i, j] = -s * np.exp(-1j * phase)
    return unitary


def _drive_terms(system, drive: ShapedDrive, rwa_window):
    terms = []
    reference = system.reference_dipole(drive.port)
    for transition in system.transitions.for_port(drive.port):
        detuning = drive.carrier - transition.frequency
        if abs(detuning) <= rwa_window:
            terms.append((system.index(transition.lower), system.index(transition.upper),
                          transition.amplitude / reference, detuning))
    if not terms:
        raise InvalidTransitionError(
            f'No {drive.port} transition within the RWA window of carrier '
            f'{constants.to_cyclic(drive.carrier) / 1e9:.4f} GHz')
    return terms


def drive_hamiltonian(system, drive: ShapedDrive, rwa_window, start=0.0):
    """Interaction-picture drive Hamiltonian H(t) under the rotating-wave approximation."""
    terms = _drive_terms(system, drive, rwa_window)
    envelope = np.asarray(drive.envelope, dtype=float)
    samples = np.linspace(0.0, drive.duration, len(envelope))
    dimension = system.dimension

    def hamiltonian(t):
        rabi = np.interp(t - start, samples, envelope)
        matrix = np.zeros((dimension, dimension), dtype=complex)
        for lower, upper, weight, detuning in terms:
            element = 0.5 * rabi * weight * 1j * np.exp(1j * (drive.phase - detuning * t))
            matrix[upper, lower] += element
            matrix[lower, upper] += np.conj(element)
        return matrix

    return hamiltonian


def _check_state(rho, time, options: EvolveOptions):
    trace = np.trace(rho).real
    if abs(trace - 1.0) > options.trace_tolerance:
        raise ToleranceError(f'Trace drifted to {trace:.12f} at t={time:.6g} s')
    lowest = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lowest < options.positivity_floor:
        raise ToleranceError(f'Density matrix eigenvalue {lowest:.3e} at t={time:.6g} s')


def lindblad_evolve(rho0: DensityMatrix, sequence: PulseSequence, couplings: PortCouplings,
                    options: EvolveOptions | None = None, system: MoleculeSystem | None = None):
    """
    Integrate the master equation through ``sequence``.

    Rotations are applied instantly and replace the latest sample; drives and
    free decay are integrated adaptively and sampled uniformly.
    """
    options = options or EvolveOptions()
    system = system or default_system()
    if tuple(rho0.labels) != tuple(system.labels):
        raise InvalidParameterError('Initial state labels do not match the molecule basis')
    sequence.validate(system, options.rwa_window)

    dimension = system.dimension
    dissipator = liouvillian(np.zeros((dimension, dimension)),
                             jump_operators(system, couplings, options.decay_overrides))
    time = rho0.time
    times, states, events = [time], [rho0.matrix.copy()], []

    for step in sequence.steps:
        rho = states[-1]
        if isinstance(step, Rotation):
            unitary = rotation_unitary(system, step.lower, step.upper, step.theta, step.phase)
            states[-1] = unitary @ rho @ unitary.conj().T
            events.append(('rotation', time, step))
            continue
        if step.duration == 0:
            continue

        hamiltonian_at = None
        max_step = np.inf
        if isinstance(step, ShapedDrive):
            hamiltonian_at = drive_hamiltonian(system, step, options.rwa_window, start=time)
            max_step = step.duration / max(len(step.envelope) - 1, 1)

        def rhs(t, y, hamiltonian_at=hamiltonian_at):
            drho = dissipator @ y
            if hamiltonian_at is not None:
                matrix = y.reshape(dimension, dimension)
                hamiltonian = hamiltonian_at(t)
                drho = drho - 1j * (hamiltonian @ matrix - matrix @ hamiltonian).reshape(-1)
            return drho

        t_eval = np.linspace(time, time + step.duration, options.samples_per_step)
        solution = integrate.solve_ivp(
            rhs, (time, time + step.duration), rho.reshape(-1).astype(complex),
            method=options.method, t_eval=t_eval, rtol=options.rtol, atol=options.atol,
            max_step=max_step,
        )
        if solution.status != 0:
            raise ToleranceError(f'Integrator failed: {solution.message}')
        for t, y in zip(solution.t[1:], solution.y.T[1:]):
            matrix = y.reshape(dimension, dimension)
            _check_state(matrix, t, options)
            times.append(float(t))
            states.append(matrix)
        events.append((type(step).__name__.lower(), time, step))
        time += step.duration

    _check_state(states[-1], time, options)
    logger.debug('Evolved %d steps to t=%.4g s (%d samples)', len(sequence.steps), time, len(times))
    return Trajectory(np.array(times), np.array(states), tuple(system.labels), tuple(events))


class FreeEvolution:
    """Uniform-grid free decay through the one-step propagator expm(L dt)."""

    def __init__(self, couplings: PortCouplings, system: MoleculeSystem | None = None, overrides=None):
        self.system = system or default_system()
        dimension = self.system.dimension
        self.dimension = dimension
        self.superop = liouvillian(np.zeros((dimension, dimension)),
                                   jump_operators(self.system, couplings, overrides))

    def _grid(self, times):
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or len(times) < 2 or times[0] < 0:
            raise InvalidParameterError('Time grid must be 1-D, start at t >= 0 and hold two or more points')
        step = times[1] - times[0]
        if step <= 0 or not np.allclose(np.diff(times), step, rtol=1e-9, atol=0):
            raise InvalidParameterError('Time grid must be uniformly spaced and increasing')
        return times, step

    def propagate(self, rho0, times):
        """Vectorized states on the grid, shape (n, d*d)."""
        times, step = self._grid(times)
        propagator = linalg.expm(self.superop * step)
        matrix = rho0.matrix if isinstance(rho0, DensityMatrix) else np.asarray(rho0)
        vector = linalg.expm(self.superop * times[0]) @ matrix.reshape(-1)
        vectors = np.empty((len(times), vector.size), dtype=complex)
        for k in range(len(times)):
            vectors[k] = vector
            vector = propagator @ vector
        return vectors

    def expectation(self, rho0, operator, times):
        vectors = self.propagate(rho0, times)
        return vectors @ operator.T.reshape(-1)

    def _lagged(self, left, times, step):
        """Rows left . P^k for k = 0..n-1."""
        propagator = linalg.expm(self.superop * step)
        rows = np.empty((len(times), left.size), dtype=complex)
        row = left
        for k in range(len(times)):
            rows[k] = row
            row = row @ propagator
        return rows

    def correlation(self, rho0, op_a, op_b, times):
        """
        G[i, j] = <A(t_i) B(t_j)> on a uniform grid.

        For t_j >= t_i the regression theorem gives Tr[B e^{L tau}(rho(t_i) A)],
        otherwise Tr[A e^{L tau}(B rho(t_j))].
        """
        times, step = self._grid(times)
        d = self.dimension
        n = len(times)
        states = self.propagate(rho0, times).reshape(n, d, d)

        after = self._lagged(op_b.T.reshape(-1), times, step) @ (states @ op_a).reshape(n, -1).T
        before = self._lagged(op_a.T.reshape(-1), times, step) @ (op_b @ states).reshape(n, -1).T

        correlation = np.empty((n, n), dtype=complex)
        for k in range(n):
            index = np.arange(n - k)
            correlation[index, index + k] = after[k, index]
            if k:
                correlation[index + k, index] = before[k, index]
        return correlation


def two_time_correlation(rho0, op_a, op_b, times, couplings: PortCouplings,
                         system: MoleculeSystem | None = None, overrides=None):
    return FreeEvolution(couplings, system, overrides).correlation(rho0, op_a, op_b, times)


def emitted_flux(trajectory: Trajectory, couplings: PortCouplings, port,
                 system: MoleculeSystem | None = None, overrides=None):
    """Photon flux into ``port`` along the trajectory (photons per second)."""
    system = system or default_system()
    flux = np.zeros(len(trajectory.times))
    for channel in decay_channels(system, couplings, overrides):
        if channel.port == port:
            flux += channel.rate * trajectory.population(channel.upper)
    return flux


def emitted_photons(trajectory: Trajectory, couplings: PortCouplings, port,
                    system: MoleculeSystem | None = None, overrides=None):
    flux = emitted_flux(trajectory, couplings, port, system, overrides)
    return float(integrate.simpson(flux, x=trajectory.times))
