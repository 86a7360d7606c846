"""
Test cases for the run ledger
"""
from datetime import timedelta

from django.test.utils import override_settings

from core.config import config_snapshot, default_config
from core.models import RunRecord
from core.tasks import RunManifest, record_run
from core.tests.test_config import BaseTestCase
from core.tests.test_factories import FailedRunRecordFactory, RunRecordFactory


class RunRecordModelTest(BaseTestCase):
    """Test cases for RunRecord model"""

    def test_string_representation(self):
        """Test a record is labelled by task, seed and status"""
        record = RunRecordFactory(task='bell', seed=3)
        self.assertEqual(str(record), 'bell (seed 3) - COMPLETED')

    def test_figure_label_preferred(self):
        """Test figure runs are labelled by figure"""
        record = RunRecordFactory(task='figure', figure='fig4', seed=0, config={})
        self.assertEqual(str(record), 'fig4 (seed 0) - COMPLETED')

    def test_newest_first(self):
        """Test records are ordered newest first"""
        first = RunRecordFactory()
        second = RunRecordFactory()
        RunRecord.objects.filter(pk=first.pk).update(created_at=second.created_at - timedelta(minutes=1))
        self.assertEqual(list(RunRecord.objects.all()), [second, first])

    def test_config_snapshot_stored(self):
        """Test the stored snapshot is the resolved configuration"""
        record = RunRecordFactory(task='raman', seed=5)
        record.refresh_from_db()
        self.assertEqual(record.config, config_snapshot(default_config('raman', seed=5)))

    def test_failed_record(self):
        """Test failed runs keep the error and no manifest"""
        record = FailedRunRecordFactory()
        self.assertEqual(record.status, 'FAILED')
        self.assertIsNone(record.manifest)
        self.assertTrue(record.error)


class RecordRunTest(BaseTestCase):
    """Test cases for writing the run ledger"""

    def setUp(self):
        super().setUp()
        self.config = default_config('eigen', seed=2)
        self.manifest = RunManifest(task='eigen', seed=2, version='1.0.0', duration_s=0.5,
                                    config=config_snapshot(self.config),
                                    files=[{'name': 'eigen.json', 'sha256': '0' * 64, 'size': 10}])

    def test_record_completed(self):
        """Test a manifest is recorded as a completed run"""
        record = record_run(self.manifest, output_dir=self.output_root)
        self.assertEqual(record.status, 'COMPLETED')
        self.assertEqual(record.manifest['files'][0]['name'], 'eigen.json')
        self.assertEqual(record.output_dir, str(self.output_root))

    def test_record_failure(self):
        """Test a failure is recorded with its message"""
        record = record_run(config=self.config, error='integrator failed')
        self.assertEqual(record.status, 'FAILED')
        self.assertEqual(record.error, 'integrator failed')
        self.assertEqual(record.task, 'eigen')

    def test_figure_failure_without_config(self):
        """Test an unknown figure is still recorded"""
        record = record_run(figure='fig9', error='Unknown figure')
        self.assertEqual(record.task, 'figure')
        self.assertEqual(str(record), 'fig9 (seed 0) - FAILED')

    @override_settings(SIM_RECORD_RUNS=False)
    def test_recording_disabled(self):
        """Test nothing is stored when recording is off"""
        self.assertIsNone(record_run(self.manifest))
        self.assertFalse(RunRecord.objects.exists())
