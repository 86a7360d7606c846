"""
Integration tests for the management commands
"""
import json
from io import StringIO
from unittest.mock import patch

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError

from core.config import default_config, serialize_config
from core.exceptions import ToleranceError
from core.exporters import sha256sum
from core.models import RunRecord
from core.tests.test_config import BaseTestCase

SMALL_OPTIONS = {
    'reflectance': {'points': 41, 'amplitudes_hz': [0.0, 0.22e6]},
    'fit': {'points': 41, 'amplitudes': [0.5, 1.0, 2.0]},
    'raman': {'rabi_points': 3, 'probe_points': 41},
    'bell': {'theta_points': 3, 'time_points': 201},
    'autler': {'probe_points': 201},
    'shots': {'time_points': 201, 'n_shots': 2000},
}


class CommandTestCase(BaseTestCase):
    """Helpers for calling commands against config files"""

    def write_config(self, task, name=None, **overrides):
        overrides.setdefault('options', SMALL_OPTIONS.get(task, {}))
        overrides.setdefault('tolerance', 1e-8)
        path = self.output_root / (name or f'{task}.json')
        path.write_text(serialize_config(default_config(task, **overrides)), encoding='utf-8')
        return path

    def call(self, *args, **kwargs):
        stdout = StringIO()
        call_command(*args, stdout=stdout, **kwargs)
        return stdout.getvalue()

    def run_config(self, task, out_name=None, **overrides):
        out = self.output_root / (out_name or f'out-{task}')
        self.call('run_task', '--config', str(self.write_config(task, **overrides)), '--out', str(out))
        return out

    def read_manifest(self, directory):
        return json.loads((directory / 'manifest.json').read_text(encoding='utf-8'))

    def assertCommandFails(self, returncode, *args):
        with self.assertRaises(CommandError) as context:
            self.call(*args)
        self.assertEqual(context.exception.returncode, returncode)
        return context.exception


class RunTaskCommandTest(CommandTestCase):
    """Test cases for the run_task command"""

    def test_eigen_run(self):
        """Test an eigen run writes its tables and manifest"""
        out = self.run_config('eigen')
        self.assertEqual(self.listed_files(out), ['eigen.json', 'eigenstates.csv', 'manifest.json'])
        summary = json.loads((out / 'eigen.json').read_text())
        lowest = min(state['energy_hz'] for state in summary['states'] if state['manifold'] == 1)
        self.assertAlmostEqual(lowest / 1e9, 5.6981, places=3)

    def test_manifest_lists_every_output(self):
        """Test the manifest carries a checksum for every other file"""
        out = self.run_config('dipoles')
        manifest = self.read_manifest(out)
        listed = {entry['name']: entry['sha256'] for entry in manifest['files']}
        self.assertEqual(sorted(listed), [name for name in self.listed_files(out) if name != 'manifest.json'])
        for name, digest in listed.items():
            self.assertEqual(sha256sum(out / name), digest)
        self.assertEqual(manifest['task'], 'dipoles')
        self.assertEqual(manifest['seed'], 0)
        self.assertIsNone(manifest['figure'])

    def test_raman_run(self):
        """Test a small Raman sweep reports the optimal pump"""
        out = self.run_config('raman')
        summary = json.loads((out / 'raman.json').read_text())
        self.assertAlmostEqual(summary['optimal_closed_form_hz'] / 1e6, 14.04, delta=0.05)
        self.assertIn('raman_transmittance.csv', self.listed_files(out))

    def test_bell_run(self):
        """Test a coarse Bell grid writes simulated and ideal moments"""
        out = self.run_config('bell')
        header = (out / 'bell_moments.csv').read_text().splitlines()[0].split(',')
        self.assertEqual(header[0], 'theta')
        self.assertIn('ideal_n_minus_re', header)
        self.assertEqual(len((out / 'bell_moments.csv').read_text().splitlines()), 4)

    def test_remaining_tasks(self):
        """Test the other tasks complete on small grids"""
        for task in ('reflectance', 'fit', 'autler', 'shots'):
            with self.subTest(task=task):
                out = self.run_config(task)
                self.assertIn(f'{task}.json', self.listed_files(out))

    def test_seeded_runs_are_identical(self):
        """Test two runs with one seed produce identical checksums"""
        first = self.read_manifest(self.run_config('shots', 'first', seed=11))
        second = self.read_manifest(self.run_config('shots', 'second', seed=11))
        self.assertEqual(first['files'], second['files'])

    def test_snapshot_records_truncation(self):
        """Test the manifest snapshot keeps a non-default truncation"""
        out = self.run_config('eigen', molecule={'n_levels': 4})
        self.assertEqual(self.read_manifest(out)['config']['molecule']['n_levels'], 4)

    def test_task_flag_without_config(self):
        """Test --task alone runs with canonical defaults"""
        out = self.output_root / 'flag'
        stdout = self.call('run_task', '--task', 'eigen', '--seed', '4', '--out', str(out))
        self.assertIn('eigen: 2 files written', stdout)
        self.assertEqual(self.read_manifest(out)['seed'], 4)

    def test_default_output_directory(self):
        """Test runs without --out land under the default output root"""
        self.call('run_task', '--task', 'eigen', '--seed', '9')
        self.assertTrue((self.output_root / 'eigen-seed9' / 'manifest.json').exists())

    def test_run_recorded(self):
        """Test a successful run is stored in the ledger"""
        self.run_config('eigen', seed=6)
        record = RunRecord.objects.get()
        self.assertEqual(record.status, 'COMPLETED')
        self.assertEqual(record.seed, 6)
        self.assertEqual(record.manifest['task'], 'eigen')

    def test_requires_config_or_task(self):
        """Test a run needs a configuration or a task"""
        self.assertCommandFails(2, 'run_task')

    def test_malformed_config(self):
        """Test malformed JSON exits with code 2"""
        path = self.output_root / 'broken.json'
        path.write_text('{"task": "eigen",}')
        error = self.assertCommandFails(2, 'run_task', '--config', str(path))
        self.assertIn('line 1', str(error))

    def test_invalid_task_in_config(self):
        """Test an unknown task in the configuration exits with code 2"""
        path = self.output_root / 'bad-task.json'
        path.write_text(json.dumps({'task': 'teleport'}))
        self.assertCommandFails(2, 'run_task', '--config', str(path))

    def test_missing_config_file(self):
        """Test a missing configuration file exits with code 4"""
        self.assertCommandFails(4, 'run_task', '--config', str(self.output_root / 'absent.json'))

    def test_failure_removes_partial_outputs(self):
        """Test a failing task leaves no output directory and is recorded"""

        def failing_handler(config, writer, prefix=''):
            writer.write_json('partial.json', {'done': False})
            raise ToleranceError('step size underflow')

        out = self.output_root / 'failed'
        with patch.dict('core.tasks.TASK_HANDLERS', {'eigen': failing_handler}):
            error = self.assertCommandFails(3, 'run_task', '--task', 'eigen', '--out', str(out))
        self.assertIn('step size underflow', str(error))
        self.assertFalse(out.exists())
        record = RunRecord.objects.get()
        self.assertEqual(record.status, 'FAILED')
        self.assertIn('step size underflow', record.error)


    def assertManifestComplete(self, directory):
        manifest = self.read_manifest(directory)
        listed = {entry['name']: entry['sha256'] for entry in manifest['files']}
        self.assertEqual(sorted([*listed, 'manifest.json']), self.listed_files(directory))
        for name, digest in listed.items():
            self.assertEqual(sha256sum(directory / name), digest)
        return manifest

    def test_rerun_replaces_earlier_run(self):
        """Test a second run into one directory leaves only its own files"""
        out = self.run_config('eigen', 'shared')
        self.run_config('dipoles', 'shared')
        manifest = self.assertManifestComplete(out)
        self.assertEqual(manifest['task'], 'dipoles')
        self.assertNotIn('eigenstates.csv', self.listed_files(out))
        self.assertEqual([name for name in self.listed_files(self.output_root) if name.endswith('.partial')], [])

    def test_foreign_directory_refused(self):
        """Test a non-empty directory without a manifest is left alone"""
        out = self.output_root / 'foreign'
        out.mkdir()
        (out / 'old.csv').write_text('x\n1\n')
        self.assertCommandFails(4, 'run_task', '--task', 'eigen', '--out', str(out))
        self.assertEqual(self.listed_files(out), ['old.csv'])

    def test_failure_keeps_earlier_run(self):
        """Test a failing rerun leaves the earlier run and its manifest intact"""
        out = self.run_config('eigen', 'kept')
        before = self.read_manifest(out)

        def failing_handler(config, writer, prefix=''):
            writer.write_json('eigen.json', {'done': False})
            raise ToleranceError('step size underflow')

        with patch.dict('core.tasks.TASK_HANDLERS', {'eigen': failing_handler}):
            self.assertCommandFails(3, 'run_task', '--task', 'eigen', '--out', str(out))
        self.assertEqual(self.assertManifestComplete(out)['files'], before['files'])

    def test_numerical_library_errors(self):
        """Test linear-algebra and value errors from a task exit with code 3"""
        failures = {'singular': np.linalg.LinAlgError('Singular matrix'), 'value': ValueError('x0 is infeasible')}
        for name, error in failures.items():
            with self.subTest(error=name):
                def failing_handler(config, writer, prefix='', error=error):
                    raise error

                out = self.output_root / name
                with patch.dict('core.tasks.TASK_HANDLERS', {'eigen': failing_handler}):
                    command_error = self.assertCommandFails(3, 'run_task', '--task', 'eigen', '--out', str(out))
                self.assertIn('eigen', str(command_error))
                self.assertFalse(out.exists())


class ReproduceFigureCommandTest(CommandTestCase):
    """Test cases for the reproduce_figure command"""

    def test_dipole_figure(self):
        """Test the dipole figure uses the measured-sign convention"""
        out = self.output_root / 'figS5'
        stdout = self.call('reproduce_figure', '--figure', 'figS5', '--out', str(out))
        self.assertIn('figS5', stdout)
        manifest = self.read_manifest(out)
        self.assertEqual(manifest['figure'], 'figS5')
        self.assertEqual(manifest['config']['options']['convention'], 'unnormalized')
        self.assertEqual(RunRecord.objects.get().figure, 'figS5')

    def test_unknown_figure(self):
        """Test an unknown figure exits with code 2 and is recorded"""
        self.assertCommandFails(2, 'reproduce_figure', '--figure', 'fig9')
        self.assertEqual(RunRecord.objects.get().status, 'FAILED')


class WriteConfigCommandTest(CommandTestCase):
    """Test cases for the write_config command"""

    def test_prints_defaults(self):
        """Test the default configuration is printed as JSON"""
        data = json.loads(self.call('write_config', 'bell'))
        self.assertEqual(data['task'], 'bell')
        self.assertTrue(data['options']['with_pi2'])

    def test_written_config_runs(self):
        """Test a written configuration is accepted by run_task"""
        path = self.output_root / 'eigen.json'
        self.call('write_config', 'eigen', '--out', str(path))
        out = self.output_root / 'from-file'
        self.call('run_task', '--config', str(path), '--out', str(out))
        self.assertTrue((out / 'manifest.json').exists())

    def test_unwritable_target(self):
        """Test an unwritable target exits with code 4"""
        self.assertCommandFails(4, 'write_config', 'eigen', '--out', str(self.output_root / 'missing' / 'x.json'))
