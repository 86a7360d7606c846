"""
Task dispatch, figure recipes and run manifests.
"""
import dataclasses
import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from django.conf import settings
from django.db import DatabaseError

from . import constants, molecule, raman, scattering
from .autler_townes import LadderDrive, autler_townes_spectrum, default_probe_grid, splitting_slope
from .config import RunConfig, config_snapshot, default_config
from .constants import to_angular, to_cyclic
from .dynamics import EvolveOptions, MoleculeSystem
from .exceptions import NoSolutionError, SingularMatrixError, ToolkitError, UnknownFigureError
from .exporters import MANIFEST_NAME, OutputWriter, read_spectra_csv, spectrum_columns
from .moments import MOMENT_NAMES, bell_sequence_moments, capture_efficiency, shot_estimator, state_vector_oracle
from .serializers import EigenstateSerializer, FitResultSerializer, RunManifestSerializer, TransitionSerializer

logger = logging.getLogger(__name__)

FIGURES = ('fig2', 'fig3', 'fig4', 'figS2', 'figS3', 'figS5')


@dataclass(frozen=True)
class RunManifest:
    task: str
    seed: int
    version: str
    duration_s: float
    config: dict
    files: list = field(default_factory=list)
    figure: str | None = None

    def as_dict(self):
        return dict(RunManifestSerializer(self).data)


def _mode_frequencies(eigensys):
    ground = eigensys.energy('0')
    return {'s': eigensys.energy('s') - ground, 'a': eigensys.energy('a') - ground}


def _hz(value):
    return None if value is None else float(to_cyclic(value))


def _finite(value):
    return value if math.isfinite(value) else None


# Task handlers: (config, writer, prefix) -> summary dict

def run_eigen(config: RunConfig, writer: OutputWriter, prefix=''):
    params = config.molecule_params()
    eigensys = molecule.diagonalize(molecule.build_hamiltonian(params), params)
    ground = eigensys.energy('0')
    states = [
        {
            'label': label,
            'energy_hz': to_cyclic(eigensys.energies[k] - ground),
            'manifold': eigensys.manifolds[k],
            'symmetry': eigensys.symmetry[k],
            'parity': float(eigensys.parity[k]),
        }
        for k, label in enumerate(eigensys.labels)
    ]
    writer.write_csv(f'{prefix}eigenstates.csv', ['label', 'energy_hz', 'manifold', 'symmetry', 'parity'],
                     ([s['label'], s['energy_hz'], s['manifold'], s['symmetry'], s['parity']] for s in states))
    couplings = config.port_couplings()
    summary = {
        'n_levels': params.n_levels,
        'states': EigenstateSerializer(states, many=True).data,
        'selectivity': {state: _finite(couplings.selectivity(state)) for state in ('s', 'a')},
        'lifetime_s': {state: _finite(couplings.lifetime(state)) for state in ('s', 'a')},
    }
    if params.identical and params.n_levels >= 3:
        summary['closed_form_hz'] = {
            label: to_cyclic(energy) for label, energy in molecule.closed_form_energies(params).items()
        }
    writer.write_json(f'{prefix}eigen.json', summary)
    return summary


def run_dipoles(config: RunConfig, writer: OutputWriter, prefix=''):
    params = config.molecule_params()
    eigensys, dipoles, transitions = molecule.solve(params)
    convention = config.options['convention']
    for port in constants.PORTS:
        writer.write_matrix(f'{prefix}dipoles_{port}.csv', 'state', dipoles.basis_order, dipoles.basis_order,
                            dipoles.for_port(port, convention))
    rows = [
        {'lower': t.lower, 'upper': t.upper, 'port': t.port, 'frequency_hz': t.frequency_hz, 'amplitude': t.amplitude}
        for t in transitions
    ]
    writer.write_csv(f'{prefix}transitions.csv', ['lower', 'upper', 'port', 'frequency_hz', 'amplitude'],
                     ([r['lower'], r['upper'], r['port'], r['frequency_hz'], r['amplitude']] for r in rows))
    summary = {'convention': convention, 'transitions': TransitionSerializer(rows, many=True).data}
    if params.identical and params.g > 0:
        c_s_minus, c_s_plus, c_a_minus, c_a_plus = molecule.coupling_coefficients(params)
        summary['coupling_coefficients'] = {
            'c_S_minus': c_s_minus, 'c_S_plus': c_s_plus, 'c_A_minus': c_a_minus, 'c_A_plus': c_a_plus,
        }
    writer.write_json(f'{prefix}dipoles.json', summary)
    return summary


def run_reflectance(config: RunConfig, writer: OutputWriter, prefix=''):
    options = config.options
    eigensys, _, _ = molecule.solve(config.molecule_params())
    couplings = config.port_couplings()
    state, port = options['state'], options['port']
    mode = _mode_frequencies(eigensys)[state]
    span = to_angular(options['span_hz'])

    columns = {'amplitude_hz': [], 'frequency_hz': [], 'r_re': [], 'r_im': [], 'r_abs': []}
    circles = []
    for amplitude_hz in options['amplitudes_hz']:
        spectrum = scattering.iq_circle(mode, couplings, state, port, to_angular(amplitude_hz), span, options['points'])
        data = spectrum_columns(spectrum)
        columns['amplitude_hz'].extend([amplitude_hz] * len(spectrum))
        for key in ('frequency_hz', 'r_re', 'r_im', 'r_abs'):
            columns[key].extend(data[key])
        centre, radius = scattering.fit_circle(spectrum.values)
        circles.append({'amplitude_hz': amplitude_hz, 'centre_re': centre.real, 'centre_im': centre.imag,
                        'radius': radius})
    writer.write_columns(f'{prefix}reflectance.csv', columns)

    try:
        magic = scattering.magic_amplitude(couplings, state, port)
    except NoSolutionError:
        magic = None
    sweep_max = 3 * (magic or couplings.gamma1(state))
    amplitudes = np.linspace(0.0, sweep_max, 301)
    response = scattering.power_sweep(mode, couplings, state, port, amplitudes)
    writer.write_columns(f'{prefix}power_sweep.csv', {
        'amplitude_hz': to_cyclic(amplitudes), 'r_re': response.real, 'r_im': response.imag, 'r_abs': np.abs(response),
    })
    gamma, gamma_prime, gamma_phi = couplings.probed(state, port)
    summary = {
        'state': state,
        'port': port,
        'mode_frequency_hz': to_cyclic(mode),
        'gamma_hz': to_cyclic(gamma),
        'gamma_prime_hz': to_cyclic(gamma_prime),
        'gamma_phi_hz': to_cyclic(gamma_phi),
        'magic_amplitude_hz': _hz(magic),
        'weak_drive_r': scattering.power_sweep(mode, couplings, state, port, [0.0])[0].real,
        'circles': circles,
    }
    writer.write_json(f'{prefix}reflectance.json', summary)
    return summary


def _model_hz(model: scattering.ReflectanceModel):
    return scattering.ReflectanceModel(
        mode_freq=to_cyclic(model.mode_freq), gamma=to_cyclic(model.gamma),
        gamma_prime=to_cyclic(model.gamma_prime), gamma_phi=to_cyclic(model.gamma_phi),
        scale=to_cyclic(model.scale),
    )


def run_fit(config: RunConfig, writer: OutputWriter, prefix=''):
    options = config.options
    eigensys, _, _ = molecule.solve(config.molecule_params())
    couplings = config.port_couplings()
    state, port = options['state'], options['port']
    truth = scattering.ReflectanceModel.from_couplings(
        _mode_frequencies(eigensys)[state], couplings, state, port, scale=to_angular(options['scale_hz']))

    if options['data_file']:
        datasets = [
            (scattering.ComplexSpectrum(to_angular(frequencies), values, port, amplitude), amplitude)
            for frequencies, values, amplitude in read_spectra_csv(options['data_file'])
        ]
        guess = truth
    else:
        datasets = scattering.synthetic_dataset(
            truth, port, options['amplitudes'], to_angular(options['span_hz']), options['points'],
            snr_db=options['snr_db'], seed=config.seed)
        guess = dataclasses.replace(
            truth, mode_freq=truth.mode_freq + 0.1 * truth.gamma, gamma=1.2 * truth.gamma,
            gamma_prime=2.0 * truth.gamma_prime, scale=0.8 * truth.scale)

    fit_options = scattering.FitOptions(fit_dephasing=options['fit_dephasing'], fit_scale=options['fit_scale'])
    result = scattering.fit_reflectance(datasets, guess, fit_options)

    columns = {key: [] for key in ('amplitude', 'frequency_hz', 'data_re', 'data_im', 'model_re', 'model_im')}
    for spectrum, amplitude in datasets:
        model = result.parameters.evaluate(spectrum.frequencies, amplitude)
        columns['amplitude'].extend([amplitude] * len(spectrum))
        columns['frequency_hz'].extend(to_cyclic(spectrum.frequencies))
        columns['data_re'].extend(spectrum.values.real)
        columns['data_im'].extend(spectrum.values.imag)
        columns['model_re'].extend(model.real)
        columns['model_im'].extend(model.imag)
    writer.write_columns(f'{prefix}fit_data.csv', columns)

    in_hz = dataclasses.replace(
        result, parameters=_model_hz(result.parameters),
        errors={name: to_cyclic(error) for name, error in result.errors.items()})
    summary = {
        'fit': FitResultSerializer(in_hz).data,
        'truth_hz': dataclasses.asdict(_model_hz(truth)),
        'snr_db': None if options['data_file'] else options['snr_db'],
        'selectivity': result.parameters.gamma / result.parameters.gamma_prime
        if result.parameters.gamma_prime > 0 else None,
    }
    writer.write_json(f'{prefix}fit.json', summary)
    return summary


def run_raman(config: RunConfig, writer: OutputWriter, prefix=''):
    options = config.options
    eigensys, _, _ = molecule.solve(config.molecule_params())
    modes = _mode_frequencies(eigensys)
    couplings = config.port_couplings()
    delta = to_angular(options['delta_hz'])
    template = raman.RamanConfig(delta=delta, rabi_plus=0.0, rabi_minus=0.0, couplings=couplings,
                                 mode_s=modes['s'], mode_a=modes['a'], driven=options['driven'])
    rabi_hz = np.linspace(options['rabi_min_hz'], options['rabi_max_hz'], options['rabi_points'])
    probe_hz = np.linspace(options['probe_min_hz'], options['probe_max_hz'], options['probe_points'])

    sweep = raman.sweep_pump_amplitude(template, to_angular(rabi_hz), to_angular(probe_hz), workers=config.workers)
    writer.write_matrix(f'{prefix}raman_transmittance.csv', 'rabi_hz', rabi_hz, probe_hz, sweep.transmittance)
    writer.write_matrix(f'{prefix}raman_reflectance.csv', 'rabi_hz', rabi_hz, probe_hz, sweep.reflectance)

    branches = raman.follow_branch(template, to_angular(rabi_hz), to_angular(probe_hz))
    writer.write_columns(f'{prefix}raman_branches.csv', {
        'rabi_hz': rabi_hz,
        'left_detuning_hz': to_cyclic(branches.left_detuning),
        'left_transmittance': branches.left_transmittance,
        'right_detuning_hz': to_cyclic(branches.right_detuning),
        'right_transmittance': branches.right_transmittance,
        'split': branches.split.astype(int),
    })

    summary = {'delta_hz': options['delta_hz'], 'driven': options['driven'],
               'peak_transmittance_vs_rabi': sweep.peak_transmittance().tolist()}
    if delta > 0:
        optimum = raman.optimal_pump(couplings, delta, options['driven'])
        matched = raman.conversion_spectra(template.with_rabi(optimum.numerical),
                                           [-optimum.numerical ** 2 / (2 * delta)])
        summary.update({
            'optimal_closed_form_hz': to_cyclic(optimum.closed_form),
            'optimal_numerical_hz': to_cyclic(optimum.numerical),
            'optimal_peak_transmittance': optimum.peak_transmittance,
            'matched_peak_transmittance': raman.matched_peak_transmittance(couplings, options['driven']),
            'loss_at_matched_point': float(matched.loss[0]),
            'splitting_threshold_hz': to_cyclic(raman.splitting_threshold(couplings, delta, options['driven'])),
            'measured_optimum_hz': constants.RAMAN_MEASURED_OPTIMUM_HZ,
        })
    writer.write_json(f'{prefix}raman.json', summary)
    return summary


def _bell_grid(config: RunConfig, system, couplings, with_pi2, thetas):
    options = config.options
    evolve = EvolveOptions(rtol=config.tolerance, atol=config.tolerance * 1e-2)

    def point(theta):
        return bell_sequence_moments(
            theta, with_pi2, couplings, options['window_s'], options['time_points'],
            options['normalization'], system=system, options=evolve)

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        return list(executor.map(point, thetas))


def _moment_columns(thetas, simulated, ideal):
    columns = {'theta': thetas}
    for name in MOMENT_NAMES:
        columns[f'{name}_re'] = [np.real(getattr(m, name)) for m in simulated]
        columns[f'{name}_im'] = [np.imag(getattr(m, name)) for m in simulated]
    for name in MOMENT_NAMES:
        columns[f'ideal_{name}_re'] = [np.real(getattr(m, name)) for m in ideal]
        columns[f'ideal_{name}_im'] = [np.imag(getattr(m, name)) for m in ideal]
    return columns


def _efficiency_report(couplings, window):
    return {
        'window_s': window,
        'model': {'A': capture_efficiency(couplings.direct('a'), window),
                  'S': capture_efficiency(couplings.direct('s'), window)},
        'envelope': {'A': capture_efficiency(couplings.gamma1('a'), window),
                     'S': capture_efficiency(couplings.gamma1('s'), window)},
        'measured': constants.MEASURED_CAPTURE_EFFICIENCY,
    }


def run_bell(config: RunConfig, writer: OutputWriter, prefix=''):
    options = config.options
    system = MoleculeSystem.from_params(config.molecule_params())
    couplings = config.port_couplings()
    thetas = np.linspace(options['theta_start'], options['theta_stop'], options['theta_points'])
    simulated = _bell_grid(config, system, couplings, options['with_pi2'], thetas)
    ideal = [state_vector_oracle(theta, options['with_pi2']) for theta in thetas]
    writer.write_columns(f'{prefix}bell_moments.csv', _moment_columns(thetas, simulated, ideal))
    summary = {
        'with_pi2': options['with_pi2'],
        'normalization': simulated[0].normalization,
        'capture_efficiency': _efficiency_report(couplings, options['window_s']),
        'max_oracle_deviation': max(
            abs(getattr(s, name) - getattr(i, name)) for s, i in zip(simulated, ideal) for name in MOMENT_NAMES),
    }
    writer.write_json(f'{prefix}bell.json', summary)
    return summary


def run_autler(config: RunConfig, writer: OutputWriter, prefix=''):
    options = config.options
    system = MoleculeSystem.from_params(config.molecule_params())
    couplings = config.port_couplings()
    drive = LadderDrive.mirrored() if options['mirrored'] else LadderDrive()
    pump_detuning = to_angular(options['pump_detuning_hz'])

    spectra = {key: [] for key in ('pump_rabi_hz', 'detuning_hz', 'r_re', 'r_im', 'r_abs')}
    rows = []
    for pump_hz in options['pump_rabi_hz']:
        pump = to_angular(pump_hz)
        grid = default_probe_grid(pump, couplings, options['probe_points'], drive)
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            result = autler_townes_spectrum(pump, grid, couplings, drive, pump_detuning, system=system)
        spectra['pump_rabi_hz'].extend([pump_hz] * len(grid))
        spectra['detuning_hz'].extend(to_cyclic(grid))
        spectra['r_re'].extend(result.spectrum.values.real)
        spectra['r_im'].extend(result.spectrum.values.imag)
        spectra['r_abs'].extend(np.abs(result.spectrum.values))
        rows.append([pump_hz, to_cyclic(result.splitting),
                     '' if result.dip_separation is None else to_cyclic(result.dip_separation), int(result.resolved)])
    writer.write_columns(f'{prefix}autler_spectra.csv', spectra)
    writer.write_csv(f'{prefix}autler_splitting.csv', ['pump_rabi_hz', 'splitting_hz', 'dip_separation_hz', 'resolved'],
                     rows)
    summary = {'probe': f'{drive.lower}<->{drive.middle} via {drive.probe_port}',
               'pump': f'{drive.middle}<->{drive.upper} via {drive.pump_port}',
               'splittings_hz': [row[1] for row in rows]}
    if len(rows) >= 2:
        slope, intercept = splitting_slope([row[0] for row in rows], [row[1] for row in rows])
        summary.update({'slope': slope, 'intercept_hz': intercept})
    writer.write_json(f'{prefix}autler.json', summary)
    return summary


def run_shots(config: RunConfig, writer: OutputWriter, prefix=''):
    options = config.options
    system = MoleculeSystem.from_params(config.molecule_params())
    couplings = config.port_couplings()
    truth = bell_sequence_moments(options['theta'], options['with_pi2'], couplings, options['window_s'],
                                  options['time_points'], options['normalization'], system=system)
    estimate = shot_estimator(truth, options['noise_photons'], options['n_shots'], seed=config.seed,
                              workers=config.workers)
    summary = {
        'n_shots': options['n_shots'],
        'noise_photons': options['noise_photons'],
        'seed': config.seed,
        'true': truth.as_dict(),
        'estimate': estimate.as_dict(),
        'beyond_3_sigma': estimate.outliers(truth),
    }
    writer.write_json(f'{prefix}shots.json', summary)
    return summary


TASK_HANDLERS = {
    'eigen': run_eigen,
    'dipoles': run_dipoles,
    'reflectance': run_reflectance,
    'fit': run_fit,
    'raman': run_raman,
    'bell': run_bell,
    'autler': run_autler,
    'shots': run_shots,
}


def resolve_output_dir(config: RunConfig, output_dir, name):
    if output_dir:
        return Path(output_dir)
    if config.output_dir:
        return Path(config.output_dir)
    return Path(settings.SIM_DEFAULT_OUTPUT_DIR) / f'{name}-seed{config.seed}'


def _run_handler(config, writer, prefix):
    handler = TASK_HANDLERS[config.task]
    try:
        handler(config, writer, prefix)
    except ToolkitError:
        raise
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f'{config.task} ({handler.__name__}): {exc}') from exc
    except (ValueError, ArithmeticError) as exc:
        raise ToolkitError(f'{config.task} ({handler.__name__}): {type(exc).__name__}: {exc}') from exc


def _execute(jobs, output_dir, task, seed, figure=None):
    """Run (prefix, config) jobs into one directory and write the manifest."""
    writer = OutputWriter(output_dir)
    started = time.perf_counter()
    try:
        for prefix, config in jobs:
            _run_handler(config, writer, prefix)
        duration = time.perf_counter() - started
        snapshot = {prefix or config.task: config_snapshot(config) for prefix, config in jobs}
        if len(jobs) == 1:
            snapshot = config_snapshot(jobs[0][1])
        manifest = RunManifest(task=task, seed=seed, version=settings.SIM_TOOLKIT_VERSION, duration_s=duration,
                               config=snapshot, files=writer.checksums(), figure=figure)
        writer.write_json(MANIFEST_NAME, manifest.as_dict())
    except Exception as exc:
        logger.error('%s failed, removing partial outputs: %s', figure or task, exc)
        writer.discard()
        raise
    writer.commit()
    logger.info('%s finished in %.2f s, %d files in %s', figure or task, duration, len(manifest.files), output_dir)
    return manifest


def run_task(config: RunConfig, output_dir=None):
    """Run one configured task and return its manifest."""
    return _execute([('', config)], resolve_output_dir(config, output_dir, config.task), config.task, config.seed)


def figure_jobs(figure_id, seed=0, workers=None):
    common = {'seed': seed}
    if workers:
        common['workers'] = workers
    if figure_id == 'fig2':
        return [
            ('a_port_A_', default_config('reflectance', options={
                'state': 'a', 'port': 'A', 'span_hz': 3e6, 'amplitudes_hz': [0.0, 0.1e6, 0.22e6, 0.5e6]}, **common)),
            ('s_port_S_', default_config('reflectance', options={
                'state': 's', 'port': 'S', 'span_hz': 12e6, 'amplitudes_hz': [0.0, 0.5e6, 0.98e6, 2e6]}, **common)),
            ('s_port_A_', default_config('reflectance', options={
                'state': 's', 'port': 'A', 'span_hz': 12e6, 'amplitudes_hz': [0.0, 0.1e6, 0.5e6]}, **common)),
        ]
    if figure_id == 'fig3':
        return [('', default_config('raman', **common))]
    if figure_id == 'fig4':
        return [
            ('with_pi2_', default_config('bell', options={'with_pi2': True}, **common)),
            ('without_pi2_', default_config('bell', options={'with_pi2': False}, **common)),
        ]
    if figure_id == 'figS2':
        return [('', default_config('fit', **common))]
    if figure_id == 'figS3':
        pumps = sorted({*np.linspace(3e6, 20e6, 8).tolist(), constants.AUTLER_TOWNES_EXAMPLE_HZ})
        return [('', default_config('autler', options={'pump_rabi_hz': pumps}, **common))]
    if figure_id == 'figS5':
        return [('', default_config('dipoles', options={'convention': 'unnormalized'}, **common))]
    raise UnknownFigureError(f'Unknown figure {figure_id!r}; choose from {", ".join(FIGURES)}')


def reproduce_figure(figure_id, output_dir=None, seed=0, workers=None):
    """Run the recipe behind one figure's theory curves."""
    jobs = figure_jobs(figure_id, seed, workers)
    if output_dir is None:
        output_dir = Path(settings.SIM_DEFAULT_OUTPUT_DIR) / f'{figure_id}-seed{seed}'
    return _execute(jobs, Path(output_dir), 'figure', seed, figure=figure_id)


def record_run(manifest=None, *, config=None, figure=None, error=None, output_dir=''):
    """Store a RunRecord; a missing or broken ledger never fails a run."""
    if not settings.SIM_RECORD_RUNS:
        return None
    from .models import RunRecord

    try:
        if manifest is not None:
            return RunRecord.objects.create(
                task=manifest.task, figure=manifest.figure, seed=manifest.seed, status='COMPLETED',
                output_dir=str(output_dir), config=manifest.config, manifest=manifest.as_dict(),
                duration_s=manifest.duration_s,
            )
        return RunRecord.objects.create(
            task=config.task if config else 'figure', figure=figure, seed=config.seed if config else 0,
            status='FAILED', output_dir=str(output_dir), config=config_snapshot(config) if config else {},
            error=str(error or ''),
        )
    except DatabaseError as exc:
        logger.warning('Run ledger unavailable, run not recorded: %s', exc)
        return None
