"""
Single-tone reflection from one waveguide: the power-dependent two-level
response, magic amplitude, IQ circles and global fits across drive powers.
"""
from __future__ import annotations

import dataclasses
import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import constants
from .exceptions import (
    ConvergenceError, InvalidParameterError, NoSolutionError, RankDeficiencyWarning,
)

logger = logging.getLogger(__name__)

MODEL_VERSION = 'two-level-reflection/1'

# Relative singular-value floor of the fit Jacobian (finite differences)
RANK_TOLERANCE = 1e-6

DIRECT_PORT = {'s': 'S', 'a': 'A'}


def _check_state(state):
    if state not in DIRECT_PORT:
        raise InvalidParameterError(f'state must be "s" or "a", got {state!r}')


def _check_port(port):
    if port not in constants.PORTS:
        raise InvalidParameterError(f'port must be "S" or "A", got {port!r}')


@dataclass(frozen=True)
class PortCouplings:
    """
    Decay rates of |s> and |a> into the two waveguides (rad/s).

    gamma_s_x is |s> into A and gamma_a_x is |a> into S. Total and
    coherence decay rates are derived, never stored.
    """
    gamma_s: float
    gamma_a: float
    gamma_s_x: float
    gamma_a_x: float
    gamma_phi_s: float = 0.0
    gamma_phi_a: float = 0.0

    def __post_init__(self):
        for item in dataclasses.fields(self):
            value = getattr(self, item.name)
            if not math.isfinite(value) or value < 0:
                raise InvalidParameterError(f'{item.name} must be a finite rate >= 0, got {value}')

    @classmethod
    def canonical(cls):
        return cls(
            gamma_s=constants.to_angular(constants.GAMMA_S_HZ),
            gamma_a=constants.to_angular(constants.GAMMA_A_HZ),
            gamma_s_x=constants.to_angular(constants.GAMMA_S_CROSS_HZ),
            gamma_a_x=constants.to_angular(constants.GAMMA_A_CROSS_HZ),
            gamma_phi_s=constants.to_angular(constants.GAMMA_PHI_S_HZ),
            gamma_phi_a=constants.to_angular(constants.GAMMA_PHI_A_HZ),
        )

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def direct(self, state):
        _check_state(state)
        return self.gamma_s if state == 's' else self.gamma_a

    def cross(self, state):
        _check_state(state)
        return self.gamma_s_x if state == 's' else self.gamma_a_x

    def dephasing(self, state):
        _check_state(state)
        return self.gamma_phi_s if state == 's' else self.gamma_phi_a

    def gamma1(self, state):
        return self.direct(state) + self.cross(state)

    def gamma2(self, state):
        return self.gamma1(state) / 2 + self.dephasing(state)

    def into_port(self, state, port):
        """Decay rate of ``state`` into waveguide ``port``."""
        _check_port(port)
        return self.direct(state) if DIRECT_PORT[state] == port else self.cross(state)

    def probed(self, state, port):
        """(gamma, gamma_prime, gamma_phi) seen when probing ``state`` from ``port``."""
        gamma = self.into_port(state, port)
        return gamma, self.gamma1(state) - gamma, self.dephasing(state)

    def selectivity(self, state):
        cross = self.cross(state)
        return math.inf if cross == 0 else self.direct(state) / cross

    def lifetime(self, state):
        direct = self.direct(state)
        return math.inf if direct == 0 else 1.0 / direct


@dataclass(frozen=True)
class DriveTone:
    port: str
    frequency: float
    amplitude: float
    phase: float = 0.0

    def __post_init__(self):
        _check_port(self.port)
        if not self.amplitude >= 0:
            raise InvalidParameterError(f'Drive amplitude must be >= 0, got {self.amplitude}')


@dataclass(frozen=True)
class ComplexSpectrum:
    frequencies: np.ndarray
    values: np.ndarray
    port: str
    amplitude: float
    model_version: str = MODEL_VERSION
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        frequencies = np.asarray(self.frequencies, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if frequencies.ndim != 1 or frequencies.shape != values.shape:
            raise InvalidParameterError('frequencies and values must be 1-D arrays of equal length')
        if np.any(np.diff(frequencies) <= 0):
            raise InvalidParameterError('Spectrum frequencies must be strictly increasing')
        object.__setattr__(self, 'frequencies', frequencies)
        object.__setattr__(self, 'values', values)

    def __len__(self):
        return len(self.frequencies)

    @property
    def magnitude(self):
        return np.abs(self.values)


@dataclass(frozen=True)
class ReflectanceModel:
    """Parameters of one resonance as seen from the probing waveguide."""
    mode_freq: float
    gamma: float
    gamma_prime: float
    gamma_phi: float = 0.0
    scale: float = 1.0

    @classmethod
    def from_couplings(cls, mode_freq, couplings, state, port, scale=1.0):
        gamma, gamma_prime, gamma_phi = couplings.probed(state, port)
        return cls(mode_freq, gamma, gamma_prime, gamma_phi, scale)

    def evaluate(self, frequencies, amplitude):
        return _response(np.asarray(frequencies) - self.mode_freq, self.scale * amplitude,
                         self.gamma, self.gamma_prime, self.gamma_phi)


@dataclass(frozen=True)
class FitOptions:
    fit_dephasing: bool = False
    fit_scale: bool = True
    grid_points: int = 7
    max_iterations: int = 2000
    tolerance: float = 1e-15


@dataclass(frozen=True)
class FitResult:
    parameters: ReflectanceModel
    residual_norm: float
    errors: dict
    converged: bool
    iterations: int
    free_parameters: tuple
    rank_deficient: bool = False


def _response(delta, omega_rabi, gamma, gamma_prime, gamma_phi):
    gamma1 = gamma + gamma_prime
    gamma2 = gamma1 / 2 + gamma_phi
    if gamma == 0:
        return np.ones(np.shape(delta), dtype=complex)
    numerator = 1j * gamma * gamma1 * (delta - 1j * gamma2)
    denominator = omega_rabi ** 2 * gamma2 + gamma1 * (delta ** 2 + gamma2 ** 2)
    return 1.0 - numerator / denominator


def reflectance(mode_freq, couplings: PortCouplings, state, probed_port, tone: DriveTone):
    """
    Reflection coefficient of the tone at ``tone.frequency``.

    Probing from the opposite port exchanges the roles of the direct and
    cross rates.
    """
    if tone.port != probed_port:
        raise InvalidParameterError(f'Tone is on port {tone.port}, probed port is {probed_port}')
    gamma, gamma_prime, gamma_phi = couplings.probed(state, probed_port)
    return complex(_response(tone.frequency - mode_freq, tone.amplitude, gamma, gamma_prime, gamma_phi))


def reflectance_spectrum(mode_freq, couplings, state, port, amplitude, frequencies):
    gamma, gamma_prime, gamma_phi = couplings.probed(state, port)
    frequencies = np.asarray(frequencies, dtype=float)
    values = _response(frequencies - mode_freq, amplitude, gamma, gamma_prime, gamma_phi)
    return ComplexSpectrum(frequencies, values, port, amplitude, metadata={'state': state})


def magic_amplitude(couplings: PortCouplings, state, port=None):
    """Drive amplitude at which the on-resonance reflection vanishes."""
    port = port or DIRECT_PORT[state]
    gamma, gamma_prime, gamma_phi = couplings.probed(state, port)
    gamma1 = gamma + gamma_prime
    gamma2 = gamma1 / 2 + gamma_phi
    squared = gamma1 * (gamma - gamma2)
    if squared < 0:
        raise NoSolutionError(
            f'|{state}> probed from {port} is under-coupled; reflection cannot reach zero')
    return math.sqrt(squared)


def iq_circle(mode_freq, couplings, state, port, amplitude, freq_span, n_points):
    if n_points < 3:
        raise InvalidParameterError('An IQ circle needs at least 3 points')
    frequencies = mode_freq + np.linspace(-freq_span / 2, freq_span / 2, int(n_points))
    return reflectance_spectrum(mode_freq, couplings, state, port, amplitude, frequencies)


def fit_circle(values):
    """Algebraic least-squares circle through complex points: (centre, radius)."""
    values = np.asarray(values, dtype=complex)
    x, y = values.real, values.imag
    design = np.column_stack([x, y, np.ones_like(x)])
    target = -(x ** 2 + y ** 2)
    (d, e, f), *_ = np.linalg.lstsq(design, target, rcond=None)
    centre = complex(-d / 2, -e / 2)
    radius = math.sqrt(max(abs(centre) ** 2 - f, 0.0))
    return centre, radius


def power_sweep(mode_freq, couplings, state, port, amplitudes):
    """On-resonance reflection versus drive amplitude."""
    gamma, gamma_prime, gamma_phi = couplings.probed(state, port)
    amplitudes = np.asarray(amplitudes, dtype=float)
    return _response(np.zeros_like(amplitudes), amplitudes, gamma, gamma_prime, gamma_phi)


def swap_direct_and_cross(model: ReflectanceModel):
    return dataclasses.replace(model, gamma=model.gamma_prime, gamma_prime=model.gamma)


def synthetic_dataset(model: ReflectanceModel, port, amplitudes, freq_span, n_points,
                      snr_db=None, seed=0):
    """
    Reflection spectra of ``model`` at each input amplitude, optionally
    with additive circular complex Gaussian noise at ``snr_db``.
    """
    rng = np.random.default_rng(seed)
    frequencies = model.mode_freq + np.linspace(-freq_span / 2, freq_span / 2, int(n_points))
    datasets = []
    for amplitude in amplitudes:
        values = model.evaluate(frequencies, amplitude)
        if snr_db is not None:
            sigma = math.sqrt(np.mean(np.abs(values) ** 2) / 10 ** (snr_db / 10) / 2)
            values = values + sigma * (rng.standard_normal(values.shape) + 1j * rng.standard_normal(values.shape))
        spectrum = ComplexSpectrum(frequencies, values, port, float(amplitude),
                                   metadata={'snr_db': snr_db, 'seed': seed})
        datasets.append((spectrum, float(amplitude)))
    return datasets


class _GlobalProblem:
    """Scaled parameter vector <-> ReflectanceModel for the global fit."""

    def __init__(self, datasets, guess: ReflectanceModel, options: FitOptions):
        self.datasets = datasets
        self.guess = guess
        self.names = ['mode_freq', 'gamma', 'gamma_prime']
        if options.fit_dephasing:
            self.names.append('gamma_phi')
        if options.fit_scale:
            self.names.append('scale')
        self.width = max(guess.gamma + guess.gamma_prime, np.finfo(float).tiny)
        self.data = np.concatenate([spectrum.values for spectrum, _ in datasets])

    def unit(self, name):
        if name == 'scale':
            return self.guess.scale
        return self.width

    def to_vector(self, model):
        vector = []
        for name in self.names:
            value = getattr(model, name)
            if name == 'mode_freq':
                value = value - self.guess.mode_freq
            vector.append(value / self.unit(name))
        return np.array(vector)

    def to_model(self, vector):
        values = dataclasses.asdict(self.guess)
        for name, x in zip(self.names, vector):
            if name == 'mode_freq':
                values[name] = self.guess.mode_freq + x * self.width
            else:
                values[name] = abs(x) * self.unit(name)
        return ReflectanceModel(**values)

    def residuals(self, vector):
        model = self.to_model(vector)
        predicted = np.concatenate([
            model.evaluate(spectrum.frequencies, amplitude) for spectrum, amplitude in self.datasets
        ])
        difference = predicted - self.data
        return np.concatenate([difference.real, difference.imag])

    def cost(self, vector):
        residual = self.residuals(vector)
        return float(residual @ residual)


def _grid_seed(problem: _GlobalProblem, options: FitOptions):
    guess = problem.guess
    gamma_prime_ref = guess.gamma_prime if guess.gamma_prime > 0 else 0.05 * guess.gamma
    gammas = guess.gamma * np.logspace(-0.5, 0.5, options.grid_points)
    primes = gamma_prime_ref * np.logspace(-1, 1, options.grid_points)
    best, best_cost = None, math.inf
    for gamma, gamma_prime in itertools.product(gammas, primes):
        candidate = dataclasses.replace(guess, gamma=float(gamma), gamma_prime=float(gamma_prime))
        vector = problem.to_vector(candidate)
        cost = problem.cost(vector)
        if cost < best_cost:
            best, best_cost = vector, cost
    return best


def fit_reflectance(datasets, initial_guess: ReflectanceModel, options: FitOptions | None = None):
    """
    Global least-squares fit of the reflection model to spectra taken at
    several drive amplitudes.

    The mode frequency, gamma and gamma_prime are always free; the pure
    dephasing rate and the amplitude scale (Rabi rate per unit input
    amplitude) are free according to ``options``. Freeing both makes the
    problem degenerate. Real and imaginary parts are fitted jointly.
    """
    options = options or FitOptions()
    amplitudes = {round(float(amplitude), 15) for _, amplitude in datasets}
    if len(datasets) < 2 or len(amplitudes) < 2:
        raise InvalidParameterError('A global fit needs spectra at two or more distinct drive amplitudes')

    problem = _GlobalProblem(datasets, initial_guess, options)
    logger.info('Fitting %d spectra, free parameters: %s', len(datasets), ', '.join(problem.names))

    seed_vector = _grid_seed(problem, options)
    simplex = optimize.minimize(
        problem.cost, seed_vector, method='Nelder-Mead',
        options={'maxiter': options.max_iterations, 'xatol': 1e-10, 'fatol': 1e-16},
    )
    polish = optimize.least_squares(
        problem.residuals, simplex.x, method='lm',
        xtol=options.tolerance, ftol=options.tolerance, gtol=options.tolerance,
        max_nfev=options.max_iterations * (len(problem.names) + 1),
    )
    if polish.status == 0:
        raise ConvergenceError(f'Reflectance fit hit the evaluation cap ({polish.nfev} evaluations)')

    jacobian = polish.jac
    singular = np.linalg.svd(jacobian, compute_uv=False)
    rank_deficient = bool(singular[-1] <= singular[0] * RANK_TOLERANCE)
    if rank_deficient:
        message = f'Fit parameters are degenerate ({", ".join(problem.names)})'
        logger.warning(message)
        warnings.warn(message, RankDeficiencyWarning, stacklevel=2)

    dof = max(jacobian.shape[0] - jacobian.shape[1], 1)
    variance = 2 * polish.cost / dof
    covariance = np.linalg.pinv(jacobian.T @ jacobian) * variance
    errors = {
        name: float(math.sqrt(max(covariance[k, k], 0.0)) * problem.unit(name))
        for k, name in enumerate(problem.names)
    }
    model = problem.to_model(polish.x)
    residual_norm = float(np.linalg.norm(polish.fun))
    iterations = int(simplex.nit + polish.nfev)
    logger.info('Fit finished after %d iterations, residual norm %.3e', iterations, residual_norm)
    return FitResult(
        parameters=model,
        residual_norm=residual_norm,
        errors=errors,
        converged=bool(polish.success),
        iterations=iterations,
        free_parameters=tuple(problem.names),
        rank_deficient=rank_deficient,
    )
