"""
Configuration settings for the OAM-NFC link simulator.

Centralizes physical constants, the reference link parameters, numerical
knobs and output formats. Values are SI unless the name says otherwise.
"""

import os
from pathlib import Path

from scipy import constants

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass

# ==============================================================================
# PATHS
# ==============================================================================

PROJECT_ROOT = Path(__file__).parent.parent
OUTPUTS_DIR = PROJECT_ROOT / 'outputs'
CONFIGS_DIR = PROJECT_ROOT / 'configs'


# ==============================================================================
# PHYSICAL CONSTANTS
# ==============================================================================

MU_0 = constants.mu_0
SPEED_OF_LIGHT = constants.c


# ==============================================================================
# REFERENCE LINK (analytic capacity study)
# ==============================================================================

FREQUENCY_HZ = 13.56e6
RESONANCE_HZ = 13.35e6     # series resonance of the lumped coil model

N_TX = 8
N_RX = 8
RING_RADIUS_M = 25e-3
COIL_RADIUS_M = 5e-3
AXIAL_DISTANCE_M = 25e-3
TURNS = 1

# Copper: 0.0175 ohm*mm^2/m and a 0.05 mm^2 trace, converted to SI
RESISTIVITY_OHM_M = 0.0175e-6
WIRE_SECTION_M2 = 0.05e-6

TX_POWER_W = 8.0
NOISE_POWER_W = 0.08

# Full-wave coil model used for the BER / scheme-comparison runs
SOLVER_MODEL_TURNS = 5


# ==============================================================================
# PILOT / ESTIMATION
# ==============================================================================

PILOT_LENGTH = 17          # prime, larger than any default ring size
PILOT_ROOT = 1
PILOT_SNR_DB = 30.0
PINV_RCOND = 1e-12
CONDITION_WARN = 1e8


# ==============================================================================
# NUMERICAL PARAMETERS
# ==============================================================================

# Midpoint nodes for the pair-local integral over [0, pi]
PAIR_NODES = 1024
# Trapezoid nodes around the receive loop for the general-pose integral
LOOP_NODES = 1024

# Below this modulus psi is summed from its power series
PSI_SERIES_MAX_MODULUS = 0.5
PSI_SERIES_TERMS = 40
SINGULAR_MODULUS_GUARD = 1e-12

NEUMANN_RTOL = 1e-9
QUAD_MAX_SUBDIVISIONS = 20000


# ==============================================================================
# MONTE CARLO / SWEEPS
# ==============================================================================

RANDOM_SEED = 42
BER_TRIALS = 125_000       # x 8 modes = 1e6 bits per SNR point
MSE_TRIALS = 10_000
BER_BATCH = 25_000
WILSON_ALPHA = 0.05

GRID_POINTS_1D = 51
GRID_POINTS_2D = 26

N_JOBS = int(os.getenv('OAMNFC_N_JOBS', '1'))


# ==============================================================================
# OUTPUT FORMATS
# ==============================================================================

TABLE_FLOAT_FORMAT = '.4f'
CSV_FLOAT_FORMAT = '%.12g'
MATRIX_FLOAT_FORMAT = '%.17g'
