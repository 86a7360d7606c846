"""
Test cases for the molecule Hamiltonian, eigenstructure and dipoles
"""
import math

import numpy as np

from core import constants
from core.exceptions import DegeneracyWarning, InvalidParameterError
from core.molecule import (
    EVEN, ODD, MoleculeParams, build_hamiltonian, closed_form_energies, coupling_coefficients,
    diagonalize, drive_operator, excitation_numbers, permutation_operator, solve,
)
from core.tests.test_config import NumericTestCase
from core.tests.test_factories import MoleculeParamsFactory


def ghz(value):
    return constants.to_cyclic(value) / 1e9


class MoleculeParamsTest(NumericTestCase):
    """Test cases for MoleculeParams validation"""

    def test_canonical_is_identical(self):
        """Test the canonical device is an identical-transmon molecule"""
        params = self.canonical_params()
        self.assertTrue(params.identical)
        self.assertEqual(params.dimension, 9)

    def test_rejects_negative_coupling(self):
        """Test g < 0 is rejected"""
        with self.assertRaises(InvalidParameterError):
            MoleculeParamsFactory(g=-1.0)

    def test_rejects_single_level(self):
        """Test n_levels must be at least 2"""
        with self.assertRaises(InvalidParameterError):
            MoleculeParamsFactory(n_levels=1)

    def test_rejects_non_finite(self):
        """Test non-finite frequencies are rejected"""
        with self.assertRaises(InvalidParameterError):
            MoleculeParamsFactory(omega1=math.nan)

    def test_detuned_transmons_not_identical(self):
        """Test unequal frequencies leave identical mode"""
        params = MoleculeParamsFactory(omega2=constants.to_angular(6.1e9))
        self.assertFalse(params.identical)


class HamiltonianTest(NumericTestCase):
    """Test cases for build_hamiltonian"""

    def test_hermitian(self):
        """Test H equals its conjugate transpose"""
        for n_levels in (2, 3, 5):
            H = build_hamiltonian(self.canonical_params(n_levels))
            self.assertLess(np.max(np.abs(H - H.conj().T)), 1e-12 * np.max(np.abs(H)))

    def test_block_diagonal_by_excitation_number(self):
        """Test H never couples different excitation manifolds"""
        H = build_hamiltonian(self.canonical_params(4))
        numbers = excitation_numbers(4)
        mixing = H[numbers[:, None] != numbers[None, :]]
        self.assertEqual(np.max(np.abs(mixing)), 0.0)

    def test_commutes_with_swap(self):
        """Test identical transmons commute with the permutation operator"""
        H = build_hamiltonian(self.canonical_params())
        swap = permutation_operator(3)
        self.assertLess(np.max(np.abs(H @ swap - swap @ H)), 1e-3)

    def test_decoupled_oscillators(self):
        """Test g=0 two-level transmons give {0, w, w, 2w}"""
        omega = constants.to_angular(5e9)
        params = MoleculeParams.symmetric(omega, constants.to_angular(-200e6), 0.0, n_levels=2)
        values = np.sort(np.linalg.eigvalsh(build_hamiltonian(params)))
        np.testing.assert_allclose(values, [0.0, omega, omega, 2 * omega], atol=1e-3)


class DiagonalizeTest(NumericTestCase):
    """Test cases for diagonalize and the canonical labels"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        params = MoleculeParams.canonical()
        cls.eigensys = diagonalize(build_hamiltonian(params), params)

    def test_canonical_energies(self):
        """Test the eigenvalue table of the measured device within 0.5 MHz"""
        expected = {'a': 5.6981, 's': 6.2909, '2+L': 11.2600, '2-': 11.7421, '2+U': 12.4711}
        for label, value in expected.items():
            self.assertAlmostEqual(ghz(self.eigensys.energy(label)), value, delta=0.5e-3, msg=label)
        self.assertEqual(self.eigensys.energy('0'), 0.0)

    def test_matches_closed_form(self):
        """Test numerical energies equal the closed forms"""
        for label, energy in closed_form_energies(self.canonical_params()).items():
            self.assertAlmostEqual(self.eigensys.energy(label), energy, delta=1.0, msg=label)

    def test_canonical_labels_first(self):
        """Test the canonical labels lead the ordering"""
        self.assertEqual(self.eigensys.labels[:6], constants.CANONICAL_LABELS)

    def test_orthonormal(self):
        """Test eigenvectors are orthonormal to 1e-10"""
        states = self.eigensys.states
        overlap = states.conj().T @ states
        np.testing.assert_allclose(overlap, np.eye(len(overlap)), atol=1e-10)

    def test_symmetry_labels(self):
        """Test permutation parities of the canonical states"""
        expected = {'0': EVEN, 'a': ODD, 's': EVEN, '2-': ODD, '2+L': EVEN, '2+U': EVEN}
        for label, symmetry in expected.items():
            k = self.eigensys.index(label)
            self.assertEqual(self.eigensys.symmetry[k], symmetry, msg=label)
            self.assertGreater(abs(self.eigensys.parity[k]), 1 - 1e-9)

    def test_phase_convention(self):
        """Test the largest amplitude of each state is real and positive"""
        for k in range(self.eigensys.states.shape[1]):
            vector = self.eigensys.states[:, k]
            pivot = vector[np.argmax(np.abs(vector))]
            self.assertAlmostEqual(pivot.imag, 0.0, places=12)
            self.assertGreater(pivot.real, 0.0)

    def test_energy_order(self):
        """Test energy_order puts 2+L below 2-"""
        order = [self.eigensys.labels[k] for k in self.eigensys.energy_order()[:6]]
        self.assertEqual(order, ['0', 'a', 's', '2+L', '2-', '2+U'])

    def test_unknown_label(self):
        """Test looking up a missing label raises KeyError"""
        with self.assertRaises(KeyError):
            self.eigensys.index('3-')

    def test_zero_coupling_degenerate(self):
        """Test g=0 makes |a> and |s> degenerate"""
        omega = constants.to_angular(5e9)
        params = MoleculeParams.symmetric(omega, constants.to_angular(-250e6), 0.0)
        eigensys = diagonalize(build_hamiltonian(params), params)
        self.assertAlmostEqual(eigensys.energy('a'), omega, delta=1e-3)
        self.assertAlmostEqual(eigensys.energy('s'), omega, delta=1e-3)
        self.assertEqual(eigensys.symmetry[eigensys.index('s')], EVEN)

    def test_degeneracy_warning_for_unequal_transmons(self):
        """Test ambiguous symmetry of degenerate unequal transmons warns"""
        omega = constants.to_angular(5e9)
        params = MoleculeParams(omega, omega, constants.to_angular(-200e6), constants.to_angular(-260e6), 0.0)
        with self.assertWarns(DegeneracyWarning):
            diagonalize(build_hamiltonian(params), params)

    def test_larger_truncation_keeps_canonical_states(self):
        """Test n_levels=4 leaves the lower manifolds unchanged"""
        params = self.canonical_params(4)
        eigensys = diagonalize(build_hamiltonian(params), params)
        self.assertEqual(len(eigensys.labels), 16)
        for label in ('a', 's', '2-', '2+L', '2+U'):
            self.assertAlmostEqual(eigensys.energy(label), self.eigensys.energy(label), delta=1.0)


class DipoleTest(NumericTestCase):
    """Test cases for dipole matrices, coupling coefficients and transitions"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.params = MoleculeParams.canonical()
        cls.eigensys, cls.dipoles, cls.transitions = solve(cls.params)

    def test_coupling_coefficients(self):
        """Test c_S-, c_S+, c_A-, c_A+ of the measured device"""
        values = coupling_coefficients(self.params)
        for value, expected in zip(values, (0.53, 6.31, -0.65, 5.13)):
            self.assertAlmostEqual(value, expected, delta=0.01)

    def test_harmonic_limit(self):
        """Test alpha=0 gives c- = 0 and c+ = 4 sqrt 2"""
        params = MoleculeParams.symmetric(1.0, 0.0, 0.3)
        c_s_minus, c_s_plus, c_a_minus, c_a_plus = coupling_coefficients(params)
        self.assertAlmostEqual(c_s_minus, 0.0, places=12)
        self.assertAlmostEqual(c_a_minus, 0.0, places=12)
        self.assertAlmostEqual(c_s_plus, 4 * math.sqrt(2), places=12)
        self.assertAlmostEqual(c_a_plus, 4 * math.sqrt(2), places=12)

    def test_coupling_coefficients_need_coupling(self):
        """Test g=0 raises a division error"""
        with self.assertRaises(ZeroDivisionError):
            coupling_coefficients(MoleculeParams.symmetric(1.0, -0.1, 0.0))

    def test_symmetric_zero_diagonal(self):
        """Test both dipole matrices are symmetric with zero diagonal"""
        for port in constants.PORTS:
            matrix = self.dipoles.for_port(port)
            np.testing.assert_allclose(matrix, matrix.T, atol=1e-12)
            np.testing.assert_allclose(np.diag(matrix), 0.0)

    def test_selection_rules(self):
        """Test S connects equal symmetry and A opposite symmetry"""
        symmetry = {label: self.eigensys.symmetry[self.eigensys.index(label)] for label in self.dipoles.basis_order}
        order = self.dipoles.basis_order
        for i, first in enumerate(order):
            for j, second in enumerate(order):
                same = symmetry[first] == symmetry[second]
                if not same:
                    self.assertLess(abs(self.dipoles.d_S[i, j]), 1e-9)
                else:
                    self.assertLess(abs(self.dipoles.d_A[i, j]), 1e-9)

    def test_zero_pattern(self):
        """Test which transitions each waveguide drives"""
        driven = {(t.lower, t.upper, t.port) for t in self.transitions}
        self.assertEqual(driven, {
            ('0', 's', 'S'), ('a', '2-', 'S'), ('s', '2+L', 'S'), ('s', '2+U', 'S'),
            ('0', 'a', 'A'), ('s', '2-', 'A'), ('a', '2+L', 'A'), ('a', '2+U', 'A'),
        })

    def test_drive_sign_selects_waveguide(self):
        """Test flipping b1 + b2 to b1 - b2 swaps the S and A zero-patterns"""
        n = self.params.n_levels
        np.testing.assert_array_equal(drive_operator(n, 'S', relative_sign=-1.0), drive_operator(n, 'A'))
        np.testing.assert_array_equal(drive_operator(n, 'A', relative_sign=1.0), drive_operator(n, 'S'))
        vectors = self.eigensys.states[:, [self.eigensys.index(label) for label in self.dipoles.basis_order]]
        for port, flipped_sign in (('S', -1.0), ('A', 1.0)):
            flipped = np.real(vectors.conj().T @ drive_operator(n, port, relative_sign=flipped_sign) @ vectors)
            np.fill_diagonal(flipped, 0.0)
            other = self.dipoles.for_port('S' if port == 'A' else 'A')
            np.testing.assert_array_equal(np.abs(flipped) > 1e-9, np.abs(other) > 1e-9)
            self.assertFalse(np.array_equal(np.abs(flipped) > 1e-9, np.abs(self.dipoles.for_port(port)) > 1e-9))

    def test_drive_unknown_port(self):
        """Test an unknown port needs an explicit sign"""
        with self.assertRaises(InvalidParameterError):
            drive_operator(3, 'X')
        self.assertEqual(drive_operator(3, 'X', relative_sign=1.0).shape, (9, 9))

    def test_ground_dipoles(self):
        """Test |0> couples to |s> and |a> with amplitude sqrt 2"""
        self.assertAlmostEqual(abs(self.dipoles.element('S', '0', 's')), math.sqrt(2), places=10)
        self.assertAlmostEqual(abs(self.dipoles.element('A', '0', 'a')), math.sqrt(2), places=10)
        self.assertLess(abs(self.dipoles.element('A', '0', 's')), 1e-9)

    def test_unnormalized_convention(self):
        """Test unnormalized-composition dipoles reproduce the coupling coefficients"""
        upper = abs(self.dipoles.element('S', 's', '2+U', 'unnormalized'))
        lower = abs(self.dipoles.element('S', 's', '2+L', 'unnormalized'))
        self.assertAlmostEqual(upper, 6.31, delta=0.01)
        self.assertAlmostEqual(lower, 0.53, delta=0.01)
        self.assertAlmostEqual(upper / lower, 6.31 / 0.53, delta=0.02 * 6.31 / 0.53)
        self.assertAlmostEqual(abs(self.dipoles.element('A', 'a', '2+L', 'unnormalized')), 5.13, delta=0.01)
        self.assertAlmostEqual(abs(self.dipoles.element('A', 'a', '2+U', 'unnormalized')), 0.65, delta=0.01)

    def test_transition_frequencies(self):
        """Test table frequencies are energy differences"""
        for transition in self.transitions:
            expected = self.eigensys.energy(transition.upper) - self.eigensys.energy(transition.lower)
            self.assertAlmostEqual(transition.frequency, expected)
            self.assertGreater(transition.frequency, 0)
        self.assertAlmostEqual(self.transitions.find('0', 's').frequency_hz / 1e9, 6.2909, delta=0.5e-3)

    def test_unnormalized_convention_needs_identical(self):
        """Test unequal transmons have no unnormalized-convention matrices"""
        params = MoleculeParamsFactory(omega2=constants.to_angular(6.1e9))
        _, dipoles, _ = solve(params)
        with self.assertRaises(InvalidParameterError):
            dipoles.for_port('S', 'unnormalized')
