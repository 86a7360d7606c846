"""
Test cases for Autler-Townes pump calibration
"""
import warnings

import numpy as np

from core.autler_townes import (
    LadderDrive, autler_townes_spectrum, default_probe_grid, ladder_response, splitting_slope,
)
from core.constants import to_angular
from core.dynamics import decay_channels, default_system
from core.exceptions import InvalidTransitionError, UnresolvedSplittingWarning
from core.tests.test_config import NumericTestCase


class AutlerTownesTest(NumericTestCase):
    """Test cases for the driven-ladder reflection spectrum"""

    def setUp(self):
        self.couplings = self.canonical_couplings()

    def spectrum(self, pump_hz, drive=None, n_points=801):
        pump = to_angular(pump_hz)
        grid = default_probe_grid(pump, self.couplings, n_points, drive)
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', UnresolvedSplittingWarning)
            return autler_townes_spectrum(pump, grid, self.couplings, drive)

    def test_calibration_example(self):
        """Test the 7.65 MHz pump is recovered within 2% by the fit and by the raw dip separation"""
        result = self.spectrum(7.65e6)
        self.assertTrue(result.resolved)
        self.assertAlmostEqual(result.splitting / to_angular(7.65e6), 1.0, delta=0.02)
        self.assertEqual(len(result.dips), 2)
        self.assertAlmostEqual(result.dip_separation / to_angular(7.65e6), 1.0, delta=0.02)

    def test_splitting_linear_in_pump(self):
        """Test splitting versus pump has unit slope"""
        pumps = [4e6, 10e6, 16e6]
        splittings = [self.spectrum(pump).splitting for pump in pumps]
        slope, _ = splitting_slope(to_angular(np.array(pumps)), splittings)
        self.assertAlmostEqual(slope, 1.0, delta=0.02)

    def test_zero_pump_is_bare_resonance(self):
        """Test no pump leaves the weak-probe reflection of |a>"""
        grid = default_probe_grid(0.0, self.couplings, 201)
        with self.assertWarns(UnresolvedSplittingWarning):
            result = autler_townes_spectrum(0.0, grid, self.couplings)
        gamma_probe = self.couplings.gamma2('a')
        expected = 1 - self.couplings.gamma_a / (gamma_probe - 1j * grid)
        np.testing.assert_allclose(result.spectrum.values, expected, atol=5e-3)
        self.assertEqual(result.splitting, 0.0)
        self.assertFalse(result.resolved)

    def test_closed_form_agrees(self):
        """Test the master-equation spectrum matches the ladder closed form"""
        result = self.spectrum(10e6)
        gamma_probe = self.couplings.gamma2('a')
        model = ladder_response(result.spectrum.frequencies, result.splitting, self.couplings.gamma_a,
                                gamma_probe, self._pump_coherence_decay())
        np.testing.assert_allclose(1 - result.spectrum.values, model, atol=5e-3)

    def _pump_coherence_decay(self):
        total = sum(c.rate for c in decay_channels(default_system(), self.couplings) if c.upper == '2-')
        return total / 2

    def test_mirrored_ladder(self):
        """Test probing |s> through S with the pump through A"""
        result = self.spectrum(10e6, LadderDrive.mirrored())
        self.assertAlmostEqual(result.splitting / to_angular(10e6), 1.0, delta=0.02)
        self.assertEqual(result.spectrum.port, 'S')

    def test_forbidden_ladder(self):
        """Test a ladder through a dark port is rejected"""
        with self.assertRaises(InvalidTransitionError):
            autler_townes_spectrum(1.0, [0.0, 1.0, 2.0], self.couplings, LadderDrive(probe_port='S'))
