"""
Two-photon Raman conversion between |s> and |a> through a virtual level
detuned by ``delta`` from |2->: effective non-Hermitian two-level model,
reflection and transmission spectra, pump maps and optimal pumping.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal

from . import constants
from .exceptions import InvalidParameterError, SingularMatrixError
from .scattering import PortCouplings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RamanConfig:
    """
    Pump settings of the converter (all angular units).

    ``driven`` selects the probed resonance: "s" probes |s> from waveguide
    S and converts into A; "a" is the mirrored converter.
    """
    delta: float
    rabi_plus: float
    rabi_minus: float
    couplings: PortCouplings
    mode_s: float = constants.to_angular(constants.OMEGA_S_HZ)
    mode_a: float = constants.to_angular(constants.OMEGA_A_HZ)
    pump_plus: float = 0.0
    pump_minus: float = 0.0
    driven: str = 's'

    def __post_init__(self):
        if self.delta == 0 or not math.isfinite(self.delta):
            raise InvalidParameterError('delta must be finite and nonzero')
        if self.rabi_plus < 0 or self.rabi_minus < 0:
            raise InvalidParameterError('Pump amplitudes must be >= 0')
        if self.driven not in ('s', 'a'):
            raise InvalidParameterError(f'driven must be "s" or "a", got {self.driven!r}')

    def with_rabi(self, rabi_plus, rabi_minus=None):
        return dataclasses.replace(
            self, rabi_plus=rabi_plus, rabi_minus=rabi_plus if rabi_minus is None else rabi_minus)

    @property
    def coupling(self):
        """Raman coupling strength J = Omega+ Omega- / 2 delta."""
        return self.rabi_plus * self.rabi_minus / (2 * self.delta)

    @property
    def probed_mode(self):
        return self.mode_s if self.driven == 's' else self.mode_a


@dataclass(frozen=True)
class ConversionSpectra:
    detunings: np.ndarray
    r: np.ndarray
    t: np.ndarray
    probe_frequencies: np.ndarray
    converted_frequencies: np.ndarray

    @property
    def reflectance(self):
        return np.abs(self.r) ** 2

    @property
    def transmittance(self):
        return np.abs(self.t) ** 2

    @property
    def loss(self):
        return 1.0 - self.reflectance - self.transmittance


@dataclass(frozen=True)
class PumpSweep:
    rabi_grid: np.ndarray
    detunings: np.ndarray
    transmittance: np.ndarray
    reflectance: np.ndarray

    def peak_transmittance(self):
        return self.transmittance.max(axis=1)


@dataclass(frozen=True)
class OptimalPump:
    closed_form: float
    numerical: float
    peak_transmittance: float


@dataclass(frozen=True)
class RamanBranches:
    rabi_grid: np.ndarray
    left_detuning: np.ndarray
    left_transmittance: np.ndarray
    right_detuning: np.ndarray
    right_transmittance: np.ndarray
    split: np.ndarray


def _ordered_rates(config: RamanConfig):
    couplings = config.couplings
    if config.driven == 's':
        return (couplings.direct('s'), couplings.gamma2('s'), config.rabi_plus,
                couplings.direct('a'), couplings.gamma2('a'), config.rabi_minus)
    return (couplings.direct('a'), couplings.gamma2('a'), config.rabi_minus,
            couplings.direct('s'), couplings.gamma2('s'), config.rabi_plus)


def raman_hamiltonian(config: RamanConfig):
    """Effective 2x2 Hamiltonian in the {probed, converted} basis."""
    _, gamma2_in, rabi_in, _, gamma2_out, rabi_out = _ordered_rates(config)
    stark_in = -rabi_in ** 2 / (2 * config.delta)
    stark_out = -rabi_out ** 2 / (2 * config.delta)
    coupling = -config.coupling
    return np.array([
        [stark_in - 1j * gamma2_in, coupling],
        [coupling, stark_out - 1j * gamma2_out],
    ], dtype=complex)


def conversion_spectra(config: RamanConfig, probe_grid):
    """
    Reflection and converted transmission versus probe detuning.

    ``probe_grid`` holds probe detunings from the probed mode in the
    doubly rotating frame; lab frequencies of the probe and of the
    converted tone are reported alongside.
    """
    detunings = np.asarray(probe_grid, dtype=float)
    if not np.all(np.isfinite(detunings)):
        raise InvalidParameterError('Probe grid must be finite')
    gamma_in, _, _, gamma_out, _, _ = _ordered_rates(config)
    hamiltonian = raman_hamiltonian(config)
    shifted = hamiltonian[None, :, :] - detunings[:, None, None] * np.eye(2)[None, :, :]
    try:
        resolvent = np.linalg.inv(shifted)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError('H_R - w I is singular on the probe grid') from exc
    r = 1.0 + 1j * gamma_in * resolvent[:, 0, 0]
    t = math.sqrt(gamma_in * gamma_out) * resolvent[:, 0, 1]
    probe = config.probed_mode + detunings
    if config.driven == 's':
        converted = probe + config.pump_plus - config.pump_minus
    else:
        converted = probe - config.pump_plus + config.pump_minus
    return ConversionSpectra(detunings, r, t, probe, converted)


def matched_peak_transmittance(couplings: PortCouplings, driven='s'):
    """Largest |t|^2 reachable: the coupling matched to the geometric mean width."""
    other = 'a' if driven == 's' else 's'
    return (couplings.direct(driven) * couplings.direct(other)
            / (4 * couplings.gamma2(driven) * couplings.gamma2(other)))


def peak_transmittance(config: RamanConfig, points=801):
    """Maximum of |t|^2 over probe detuning, located on a grid then refined."""
    _, gamma2_in, _, _, gamma2_out, _ = _ordered_rates(config)
    hamiltonian = raman_hamiltonian(config)
    centre = float(np.mean(np.diag(hamiltonian).real))
    half_span = 4 * (abs(config.coupling) + gamma2_in + gamma2_out
                     + abs(hamiltonian[0, 0].real - hamiltonian[1, 1].real))
    grid = centre + np.linspace(-half_span, half_span, points)
    values = conversion_spectra(config, grid).transmittance
    k = int(np.argmax(values))
    lower, upper = grid[max(k - 1, 0)], grid[min(k + 1, points - 1)]
    result = optimize.minimize_scalar(
        lambda w: -conversion_spectra(config, [w]).transmittance[0],
        bounds=(lower, upper), method='bounded', options={'xatol': 1e-9 * half_span},
    )
    return max(float(-result.fun), float(values[k]))


def optimal_pump(couplings: PortCouplings, delta, driven='s'):
    """
    Optimal equal pump amplitude.

    ``closed_form`` uses the direct rates only; ``numerical`` maximizes the
    peak transmission with cross rates and dephasing included.
    """
    if delta <= 0:
        raise InvalidParameterError('delta must be > 0')
    closed_form = (couplings.gamma_a * couplings.gamma_s) ** 0.25 * math.sqrt(delta)
    template = RamanConfig(delta=delta, rabi_plus=0.0, rabi_minus=0.0, couplings=couplings, driven=driven)

    def objective(scale):
        return -peak_transmittance(template.with_rabi(scale * closed_form))

    result = optimize.minimize_scalar(objective, bounds=(0.25, 4.0), method='bounded',
                                      options={'xatol': 1e-7})
    numerical = float(result.x * closed_form)
    logger.info('Optimal pump: closed form %.4g MHz, numerical %.4g MHz',
                constants.to_cyclic(closed_form) / 1e6, constants.to_cyclic(numerical) / 1e6)
    return OptimalPump(closed_form=closed_form, numerical=numerical, peak_transmittance=float(-result.fun))


def sweep_pump_amplitude(config_template: RamanConfig, rabi_grid, probe_grid, workers=1):
    """|t|^2 and |r|^2 maps over (equal pump amplitude, probe detuning)."""
    rabi_grid = np.asarray(rabi_grid, dtype=float)
    probe_grid = np.asarray(probe_grid, dtype=float)
    if rabi_grid.size == 0 or probe_grid.size == 0:
        raise InvalidParameterError('Pump and probe grids must be nonempty')

    def row(rabi):
        spectra = conversion_spectra(config_template.with_rabi(rabi), probe_grid)
        return spectra.transmittance, spectra.reflectance

    with ThreadPoolExecutor(max_workers=max(int(workers), 1)) as executor:
        rows = list(executor.map(row, rabi_grid))
    transmittance = np.vstack([t for t, _ in rows])
    reflectance = np.vstack([r for _, r in rows])
    return PumpSweep(rabi_grid, probe_grid, transmittance, reflectance)


def follow_branch(config_template: RamanConfig, rabi_grid, probe_grid, prominence=1e-3):
    """
    Left and right transmission peaks versus pump amplitude.

    Both branches are reported; they coincide while the Raman levels are
    not split.
    """
    sweep = sweep_pump_amplitude(config_template, rabi_grid, probe_grid)
    n = len(sweep.rabi_grid)
    left_w, left_t = np.full(n, np.nan), np.full(n, np.nan)
    right_w, right_t = np.full(n, np.nan), np.full(n, np.nan)
    split = np.zeros(n, dtype=bool)
    for k, row in enumerate(sweep.transmittance):
        peaks, _ = signal.find_peaks(row, prominence=prominence * max(row.max(), np.finfo(float).tiny))
        if len(peaks) == 0:
            continue
        left, right = peaks[0], peaks[-1]
        left_w[k], left_t[k] = sweep.detunings[left], row[left]
        right_w[k], right_t[k] = sweep.detunings[right], row[right]
        split[k] = len(peaks) > 1
    return RamanBranches(sweep.rabi_grid, left_w, left_t, right_w, right_t, split)


def splitting_threshold(couplings: PortCouplings, delta, driven='s'):
    """Equal pump amplitude above which |t|^2 shows two maxima."""
    other = 'a' if driven == 's' else 's'
    gamma_in, gamma_out = couplings.gamma2(driven), couplings.gamma2(other)
    coupling = math.sqrt((gamma_in ** 2 + gamma_out ** 2) / 2)
    return math.sqrt(2 * abs(delta) * coupling)
