"""
Moments of the two itinerant photon modes emitted by the molecule:
temporal mode matching, the entangling pulse sequence, its ideal
state-vector counterpart and a shot-level reference-subtraction estimator.

a_minus is the mode emitted by |a> into waveguide A, a_plus the mode
emitted by |s> into waveguide S.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from django.conf import settings
from scipy import integrate

from . import constants
from .dynamics import (
    DensityMatrix, FreeEvolution, PulseSequence, Rotation, channel_rate, default_system,
    lindblad_evolve, output_operator,
)
from .exceptions import CovarianceRepairWarning, InvalidParameterError
from .scattering import PortCouplings

logger = logging.getLogger(__name__)

MOMENT_NAMES = ('a_minus', 'a_plus', 'n_minus', 'n_plus', 'cross', 'pair')
NORMALIZATIONS = ('none', 'efficiency')


@dataclass(frozen=True)
class MomentSet:
    """
    <a->, <a+>, <a-^dag a->, <a+^dag a+>, <a-^dag a+> (cross) and
    <a- a+> (pair), with the normalization that produced them and, for
    shot estimates, the standard error of each.
    """
    a_minus: complex = 0j
    a_plus: complex = 0j
    n_minus: float = 0.0
    n_plus: float = 0.0
    cross: complex = 0j
    pair: complex = 0j
    normalization: str = 'none'
    errors: dict | None = None

    def values(self):
        return {name: getattr(self, name) for name in MOMENT_NAMES}

    def as_dict(self):
        data = {}
        for name, value in self.values().items():
            data[f'{name}_re'] = float(np.real(value))
            data[f'{name}_im'] = float(np.imag(value))
        data['normalization'] = self.normalization
        if self.errors is not None:
            data.update({f'{name}_err': float(error) for name, error in self.errors.items()})
        return data

    def cauchy_schwarz_excess(self):
        """|<a-^dag a+>|^2 - n- n+ (<= 0 for physical moments)."""
        return abs(self.cross) ** 2 - self.n_minus * self.n_plus

    def outliers(self, other: 'MomentSet', sigmas=3.0):
        """Names of moments differing from ``other`` by more than ``sigmas`` standard errors."""
        errors = self.errors or {}
        return [
            name for name in MOMENT_NAMES
            if abs(getattr(self, name) - getattr(other, name)) > sigmas * errors.get(name, 0.0)
        ]


@dataclass(frozen=True)
class ModeMatchResult:
    times: np.ndarray
    filter: np.ndarray
    window: float
    efficiency: float
    decay_rate: float
    photon_number: float | None = None

    def project(self, field):
        """Overlap of the filter with a one-time field expectation <c(t)>."""
        return complex(integrate.simpson(np.conj(self.filter) * field, x=self.times))

    def project_pair(self, correlation, other: 'ModeMatchResult | None' = None, adjoint_first=True):
        """
        Double integral of a two-time correlator against this filter (first
        time argument) and ``other`` (second).
        """
        other = other or self
        first = self.filter if adjoint_first else np.conj(self.filter)
        weights = first[:, None] * np.conj(other.filter)[None, :]
        inner = integrate.simpson(weights * correlation, x=other.times, axis=1)
        return complex(integrate.simpson(inner, x=self.times))

    def numerical_efficiency(self):
        """Captured fraction of a unit exponential emission, by quadrature."""
        rate = self.decay_rate
        norm = math.sqrt(rate / self.efficiency)
        amplitude, _ = integrate.quad(
            lambda t: norm * math.exp(-rate * t / 2) * math.sqrt(rate) * math.exp(-rate * t / 2),
            0.0, self.window, epsabs=1e-14, epsrel=1e-13,
        )
        return amplitude ** 2


def capture_efficiency(decay_rate, window):
    if window == math.inf:
        return 1.0
    return -math.expm1(-decay_rate * window)


def mode_match(decay_rate, window, times=None, n_points=2001, correlation=None):
    """
    Normalized exponential filter sqrt(G / eta) exp(-G t / 2) on [0, window].

    With ``correlation`` (a <c^dag(t) c(t')> matrix on ``times``) the
    matched-mode photon number is filled in.
    """
    if not window > 0:
        raise InvalidParameterError('Acquisition window must be > 0')
    if not decay_rate > 0:
        raise InvalidParameterError('Decay rate must be > 0')
    efficiency = capture_efficiency(decay_rate, window)
    if times is None:
        span = window if window != math.inf else 40.0 / decay_rate
        times = np.linspace(0.0, span, n_points)
    times = np.asarray(times, dtype=float)
    filter_ = math.sqrt(decay_rate / efficiency) * np.exp(-decay_rate * times / 2)
    result = ModeMatchResult(times, filter_, window, efficiency, decay_rate)
    if correlation is not None:
        result = dataclasses.replace(result, photon_number=result.project_pair(correlation).real)
    return result


def _emission_window(couplings, window):
    if window != math.inf:
        return window
    return 30.0 / min(couplings.gamma1('a'), couplings.gamma1('s'))


def normalize(moments: MomentSet, scale_minus, scale_plus, mode):
    """Divide moments by sqrt(eta * branching) per mode factor."""
    if mode not in NORMALIZATIONS:
        raise InvalidParameterError(f'Unknown normalization {mode!r}')
    if mode == 'none':
        return moments
    root_minus, root_plus = math.sqrt(scale_minus), math.sqrt(scale_plus)
    logger.info('Normalizing moments by capture x branching: minus %.4f, plus %.4f', scale_minus, scale_plus)
    return dataclasses.replace(
        moments,
        a_minus=moments.a_minus / root_minus,
        a_plus=moments.a_plus / root_plus,
        n_minus=moments.n_minus / scale_minus,
        n_plus=moments.n_plus / scale_plus,
        cross=moments.cross / (root_minus * root_plus),
        pair=moments.pair / (root_minus * root_plus),
        normalization=f'efficiency (minus {scale_minus:.6f}, plus {scale_plus:.6f})',
    )


def _dagger(op):
    return op.conj().T


def bell_sequence_moments(theta, with_pi2=True, couplings: PortCouplings | None = None,
                          window=constants.ACQUISITION_WINDOW_S, n_points=1001,
                          normalization='none', system=None, overrides=None, phase=0.0, options=None):
    """
    Entangling sequence: optional pi/2 on 0<->a through A, rotation by
    ``theta`` on 0<->s through S, then free emission matched over ``window``.
    """
    if not window > 0:
        raise InvalidParameterError('Acquisition window must be > 0')
    couplings = couplings or PortCouplings.canonical()
    system = system or default_system()

    steps = [Rotation('0', 'a', 'A', math.pi / 2)] if with_pi2 else []
    steps.append(Rotation('0', 's', 'S', theta, phase))
    prepared = lindblad_evolve(DensityMatrix.pure('0', system.labels), PulseSequence(steps),
                               couplings, options, system=system).final

    times = np.linspace(0.0, _emission_window(couplings, window), n_points)
    c_minus = output_operator(system, couplings, '0', 'a', 'A', overrides)
    c_plus = output_operator(system, couplings, '0', 's', 'S', overrides)
    mode_minus = mode_match(couplings.gamma1('a'), window, times)
    mode_plus = mode_match(couplings.gamma1('s'), window, times)

    evolution = FreeEvolution(couplings, system, overrides)
    rho = prepared.matrix
    moments = MomentSet(
        a_minus=mode_minus.project(evolution.expectation(rho, c_minus, times)),
        a_plus=mode_plus.project(evolution.expectation(rho, c_plus, times)),
        n_minus=mode_minus.project_pair(evolution.correlation(rho, _dagger(c_minus), c_minus, times)).real,
        n_plus=mode_plus.project_pair(evolution.correlation(rho, _dagger(c_plus), c_plus, times)).real,
        cross=mode_minus.project_pair(evolution.correlation(rho, _dagger(c_minus), c_plus, times), mode_plus),
        pair=mode_minus.project_pair(evolution.correlation(rho, c_minus, c_plus, times), mode_plus,
                                     adjoint_first=False),
    )
    scale_minus = mode_minus.efficiency * channel_rate(system, couplings, '0', 'a', 'A', overrides) / couplings.gamma1('a')
    scale_plus = mode_plus.efficiency * channel_rate(system, couplings, '0', 's', 'S', overrides) / couplings.gamma1('s')
    return normalize(moments, scale_minus, scale_plus, normalization)


def state_vector_oracle(theta, with_pi2=True, phase=0.0):
    """
    Ideal moments from the pure state after lossless emission, by inner
    products on molecule {0, a, s} x photon A {0, 1} x photon S {0, 1}.
    """
    molecule, photon = 3, 2
    def index(m, na, ns):
        return (m * photon + na) * photon + ns

    dimension = molecule * photon * photon

    def rotation(level, angle, angle_phase):
        unitary = np.eye(dimension, dtype=complex)
        c, s = math.cos(angle / 2), math.sin(angle / 2)
        for na in range(photon):
            for ns in range(photon):
                ground, excited = index(0, na, ns), index(level, na, ns)
                unitary[ground, ground] = unitary[excited, excited] = c
                unitary[excited, ground] = s * np.exp(1j * angle_phase)
                unitary[ground, excited] = -s * np.exp(-1j * angle_phase)
        return unitary

    emission = np.zeros((dimension, dimension))
    for m in range(molecule):
        for na in range(photon):
            for ns in range(photon):
                source = index(m, na, ns)
                if m == 1 and na == 0:
                    emission[index(0, 1, ns), source] = 1.0
                elif m == 2 and ns == 0:
                    emission[index(0, na, 1), source] = 1.0
                elif m == 0:
                    emission[source, source] = 1.0

    state = np.zeros(dimension, dtype=complex)
    state[index(0, 0, 0)] = 1.0
    if with_pi2:
        state = rotation(1, math.pi / 2, 0.0) @ state
    state = emission @ (rotation(2, theta, phase) @ state)

    lowering = np.diag([1.0], 1)
    a_minus = np.kron(np.kron(np.eye(molecule), lowering), np.eye(photon))
    a_plus = np.kron(np.kron(np.eye(molecule), np.eye(photon)), lowering)
    def expect(op):
        return complex(state.conj() @ op @ state)

    return MomentSet(
        a_minus=expect(a_minus),
        a_plus=expect(a_plus),
        n_minus=expect(a_minus.T @ a_minus).real,
        n_plus=expect(a_plus.T @ a_plus).real,
        cross=expect(a_minus.T @ a_plus),
        pair=expect(a_minus @ a_plus),
    )


def _signal_sampler(moments: MomentSet):
    """Mean and real 4x4 square-root covariance of (Re a-, Re a+, Im a-, Im a+)."""
    mean = np.array([moments.a_minus, moments.a_plus], dtype=complex)
    normal = np.array([[moments.n_minus, moments.cross], [np.conj(moments.cross), moments.n_plus]], dtype=complex)
    covariance = normal.T - np.outer(mean, mean.conj())
    # <a_m^2> is not part of the moment set; take it as <a_m>^2
    joint_pair = moments.pair - mean[0] * mean[1]
    pseudo = np.array([[0.0, joint_pair], [joint_pair, 0.0]], dtype=complex)
    real_real = 0.5 * np.real(covariance + pseudo)
    imag_imag = 0.5 * np.real(covariance - pseudo)
    imag_real = 0.5 * np.imag(covariance + pseudo)
    real_imag = 0.5 * np.imag(pseudo - covariance)
    joint = np.block([[real_real, real_imag], [imag_real, imag_imag]])
    joint = 0.5 * (joint + joint.T)
    eigenvalues, eigenvectors = np.linalg.eigh(joint)
    floor = -1e-12 * max(1.0, float(np.abs(eigenvalues).max()))
    if eigenvalues.min() < floor:
        message = f'Signal covariance not positive semidefinite (min eigenvalue {eigenvalues.min():.3e}); clipped'
        logger.warning(message)
        warnings.warn(message, CovarianceRepairWarning, stacklevel=3)
    root = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
    return mean, root


def _statistics(minus, plus):
    """Per-shot samples of the six moment estimators."""
    return (minus, plus, np.abs(minus) ** 2, np.abs(plus) ** 2, np.conj(minus) * plus, minus * plus)


def _accumulate(samples):
    return np.array([[s.real.sum(), s.imag.sum(), (s.real ** 2).sum(), (s.imag ** 2).sum()] for s in samples])


def _chunk(seed_sequence, size, mean, root, noise_photons):
    rng = np.random.default_rng(seed_sequence)
    noise_scale = math.sqrt((noise_photons + 1.0) / 2.0)

    def noise():
        return noise_scale * (rng.standard_normal((2, size)) + 1j * rng.standard_normal((2, size)))

    quadratures = root @ rng.standard_normal((4, size))
    signal = mean[:, None] + quadratures[:2] + 1j * quadratures[2:]
    measured = signal + noise()
    reference = noise()
    return _accumulate(_statistics(*measured)), _accumulate(_statistics(*reference))


def shot_estimator(true_moments: MomentSet, noise_photons, n_shots, seed=0, chunk=None, workers=1):
    """
    Reference-subtracted moment estimates from simulated heterodyne shots.

    Each shot records S = a + h^dag per mode, with ``a`` a complex Gaussian
    carrying the true first and second moments and ``h`` a thermal noise
    mode of mean photon number ``noise_photons``; an equal-size run with
    the signal off is subtracted.
    """
    if n_shots < 1:
        raise InvalidParameterError('n_shots must be >= 1')
    if noise_photons < 0:
        raise InvalidParameterError('Noise photon number must be >= 0')
    chunk = int(chunk or settings.SIM_SHOT_CHUNK)
    mean, root = _signal_sampler(true_moments)
    sizes = [chunk] * (n_shots // chunk) + ([n_shots % chunk] if n_shots % chunk else [])
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    with ThreadPoolExecutor(max_workers=max(int(workers), 1)) as executor:
        results = list(executor.map(
            lambda job: _chunk(job[0], job[1], mean, root, noise_photons), zip(children, sizes)))
    logger.info('Simulated %d shots in %d chunks (noise photons %.3g)', n_shots, len(sizes), noise_photons)

    signal_sums = sum(result[0] for result in results)
    reference_sums = sum(result[1] for result in results)

    def moments_of(sums):
        mean_re, mean_im = sums[:, 0] / n_shots, sums[:, 1] / n_shots
        var_re = np.maximum(sums[:, 2] / n_shots - mean_re ** 2, 0.0)
        var_im = np.maximum(sums[:, 3] / n_shots - mean_im ** 2, 0.0)
        return mean_re + 1j * mean_im, var_re + var_im

    signal_mean, signal_var = moments_of(signal_sums)
    reference_mean, reference_var = moments_of(reference_sums)
    estimate = signal_mean - reference_mean
    errors = np.sqrt((signal_var + reference_var) / n_shots)
    return MomentSet(
        a_minus=complex(estimate[0]),
        a_plus=complex(estimate[1]),
        n_minus=float(estimate[2].real),
        n_plus=float(estimate[3].real),
        cross=complex(estimate[4]),
        pair=complex(estimate[5]),
        normalization=true_moments.normalization,
        errors=dict(zip(MOMENT_NAMES, (float(e) for e in errors))),
    )
