"""
Test configuration and utilities
"""
import shutil
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, TestCase
from django.test.utils import override_settings

from core.molecule import MoleculeParams
from core.scattering import PortCouplings


# Test settings overrides
TEST_SETTINGS_OVERRIDES = {
    'SIM_RECORD_RUNS': True,
    'SIM_SHOT_CHUNK': 250_000,
}


class CanonicalFixturesMixin:
    """Canonical molecule and waveguide couplings shared by the numeric tests"""

    @staticmethod
    def canonical_params(n_levels=3):
        return MoleculeParams.canonical(n_levels)

    @staticmethod
    def canonical_couplings():
        return PortCouplings.canonical()

    @staticmethod
    def selective_couplings():
        """Canonical direct rates with no leakage into the other waveguide"""
        return PortCouplings.canonical().replace(gamma_s_x=0.0, gamma_a_x=0.0)

    @staticmethod
    def closed_couplings():
        return PortCouplings(0.0, 0.0, 0.0, 0.0)

    def assertComplexClose(self, first, second, tolerance, msg=None):
        """Assert |first - second| <= tolerance for complex scalars or arrays"""
        difference = np.max(np.abs(np.asarray(first) - np.asarray(second)))
        if difference > tolerance:
            self.fail(self._formatMessage(msg, f'{first!r} != {second!r} (difference {difference:.3e})'))


class OutputDirectoryMixin:
    """Fresh output directory per test, also used as the default output root"""

    def setUp(self):
        super().setUp()
        self.output_root = Path(tempfile.mkdtemp(prefix='waveguidemol-test-'))
        self.addCleanup(shutil.rmtree, self.output_root, ignore_errors=True)
        settings_override = override_settings(SIM_DEFAULT_OUTPUT_DIR=self.output_root, **TEST_SETTINGS_OVERRIDES)
        settings_override.enable()
        self.addCleanup(settings_override.disable)

    def listed_files(self, directory):
        return sorted(path.name for path in Path(directory).iterdir())


class NumericTestCase(CanonicalFixturesMixin, SimpleTestCase):
    """Base test case for pure numerics"""


class BaseTestCase(CanonicalFixturesMixin, OutputDirectoryMixin, TestCase):
    """Base test case with a temporary output directory and the run ledger"""
