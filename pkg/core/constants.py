"""
Canonical parameter set of the two-transmon molecule.

Values are cyclic frequencies in Hz (the quoted value/2π); use
``to_angular`` at the boundary.
"""
import math

TWO_PI = 2.0 * math.pi

# Identical-transmon Hamiltonian, from spectroscopy
OMEGA_HZ = 5.9945e9
ALPHA_HZ = -246.9e6
G_HZ = 296.4e6
N_LEVELS = 3

# Measured decay rates
GAMMA_S_HZ = 1.388e6
GAMMA_A_HZ = 0.311e6
GAMMA_S_CROSS_HZ = 29.8e3
GAMMA_A_CROSS_HZ = 8.8e3
GAMMA_PHI_S_HZ = 0.0
GAMMA_PHI_A_HZ = 0.0

# Measured mode frequencies
OMEGA_A_HZ = 5.6981e9
OMEGA_S_HZ = 6.2909e9

# Experiment settings
RAMAN_DELTA_HZ = 300e6
RAMAN_MEASURED_OPTIMUM_HZ = 15.35e6
ACQUISITION_WINDOW_S = 1.02e-6
MEASURED_CAPTURE_EFFICIENCY = {'A': 0.748, 'S': 0.989}
AUTLER_TOWNES_EXAMPLE_HZ = 7.65e6

# Canonical eigenstate labels in basis order
CANONICAL_LABELS = ('0', 'a', 's', '2-', '2+L', '2+U')

PORTS = ('S', 'A')


def to_angular(hz):
    return TWO_PI * hz


def to_cyclic(rad_per_s):
    return rad_per_s / TWO_PI
