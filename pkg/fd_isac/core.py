"""core.py - root module exports"""

from pathlib import Path
import logging

# Static directories
ASSETS_DIR = Path(__file__).parent / 'assets'
CONFIGS_DIR = ASSETS_DIR / 'configs'
SWEEPS_DIR = ASSETS_DIR / 'sweeps'
ROOT_DIR = Path(__file__).parent.parent
RESULTS_DIR = ROOT_DIR / 'results'

TQDM_DISABLE = False

SEED = 42

SCHEMA_VERSION = 1

logging.basicConfig(
    format='%(asctime)s,%(msecs)d %(levelname)-8s [%(filename)s:%(lineno)d] %(message)s',
    datefmt='%Y-%m-%d:%H:%M:%S', level=logging.INFO)

# NUMERIC TOLERANCES
# eigenvalues above -PSD_TOL * trace count as nonnegative
PSD_TOL = 1e-9
# duality gap / feasibility targets handed to the conic solver
CONIC_TOL = 1e-8
# worst scaled constraint violation accepted from an "optimal" solve
RESIDUAL_TOL = 1e-7
