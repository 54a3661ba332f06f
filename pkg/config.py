##############################################################
# config.py
# ------------------------------------------------------------
# Unified configuration file for the FH-ACI transmission capacity toolkit.
# Centralizes directories, numerical tolerances, Monte-Carlo defaults,
# rate-table grids, optimizer settings and scenario presets.
#
# Used by:
#   - app.py
#   - numerics.py / outage.py / cpfsk.py / simkit.py
#   - optimize.py
#   - utils/file_utils.py
##############################################################

import os

from dotenv import load_dotenv

load_dotenv()

# ============================================================
# 🗂️ BASE DIRECTORIES & PATHS
# ============================================================

PROJECT_DIR = os.path.dirname(os.path.abspath(__file__)) if "__file__" in globals() else os.getcwd()

OUTPUT_DIR = os.getenv("OUTPUT_DIR", os.path.join(PROJECT_DIR, "results"))
CACHE_DIR = os.getenv("CACHE_DIR", os.path.join(PROJECT_DIR, "cache"))
CONFIG_DIR = os.getenv("CONFIG_DIR", os.path.join(PROJECT_DIR, "configs"))

RATE_TABLE_PATH = os.getenv("RATE_TABLE_PATH", os.path.join(CACHE_DIR, "rate_table.json"))
TABLE1_CONFIG_PATH = os.path.join(CONFIG_DIR, "table1.yaml")
# table1 reports tau' scaled by this factor, the units of the config-set references.
TABLE1_TAU_SCALE = 1e3
MANIFEST_NAME = "manifest.json"

# ============================================================
# ⚙️ APP SETTINGS
# ============================================================

APP_NAME = "FH-ACI Transmission Capacity Toolkit"
APP_VERSION = "1.0.0"
CLI_PROG = "fhaci"

CSV_SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_VALIDATION_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERIC_FAILURE = 3

# ============================================================
# 🧮 NUMERICS
# ============================================================

SIMPSON_PANELS = int(os.getenv("SIMPSON_PANELS", 16))
SIMPSON_MAX_PANELS = int(os.getenv("SIMPSON_MAX_PANELS", 2 ** 20))
SIMPSON_ABS_TOL = float(os.getenv("SIMPSON_ABS_TOL", 1e-10))
SIMPSON_REL_TOL = float(os.getenv("SIMPSON_REL_TOL", 1e-8))

HYP2F1_MAX_TERMS = int(os.getenv("HYP2F1_MAX_TERMS", 200_000))
HYP2F1_TERM_TOL = 1e-16

# Floating-point slack tolerated before an outage value outside [0, 1] is an error.
PROBABILITY_SLACK = 1e-12

# ============================================================
# 🎲 MONTE-CARLO
# ============================================================

DEFAULT_SEED = int(os.getenv("DEFAULT_SEED", 20120611))
MC_BLOCK_SIZE = int(os.getenv("MC_BLOCK_SIZE", 10_000))
SHADOW_MC_DRAWS = int(os.getenv("SHADOW_MC_DRAWS", 10_000))
VALIDATION_TRIALS = int(os.getenv("VALIDATION_TRIALS", 100_000))
WORKERS = int(os.getenv("WORKERS", 1))

# Upper bound on elements held at once by the shadowed quadrature (y-draws x l x panels).
SHADOW_QUAD_ELEMENT_BUDGET = int(os.getenv("SHADOW_QUAD_ELEMENT_BUDGET", 2 ** 24))

# ============================================================
# 📡 CPFSK / RATE TABLE
# ============================================================

# Largest modulation index used on the PSD/bandwidth path (integer h gives spectral lines).
H_MAX_CONTINUOUS = 1.0 - 1e-4
BANDWIDTH_RTOL = 1e-6

# "sinc_h" -> |sinc(h)| (complex-envelope correlation of tones spaced h/T), "sinc_2h" -> |sinc(2h)|
TONE_CORRELATION = os.getenv("TONE_CORRELATION", "sinc_h")

RATE_TABLE_VERSION = 1
RATE_H_GRID = [round(0.05 * k, 2) for k in range(1, 21)]
RATE_SNR_DB_GRID = [round(-10.0 + 0.5 * k, 1) for k in range(61)]
RATE_TRIALS = int(os.getenv("RATE_TRIALS", 100_000))

# Rate-table monotonicity violations beyond this many standard errors are construction errors.
RATE_MONOTONE_SIGMAS = 4.0

# ============================================================
# 🧭 OPTIMIZER
# ============================================================

NM_INITIAL = (20.0, 0.5, 0.5, 0.975)
NM_STEPS = (1.0, 0.025, 0.025, 0.005)
NM_BOUNDS = ((1.0, 400.0), (0.01, 0.99), (0.01, 0.999), (0.90, 0.999))
NM_MAX_ITER = int(os.getenv("NM_MAX_ITER", 500))
NM_XTOL = 1e-3
NM_FTOL = 1e-6
NM_DEGENERATE_RATIO = 1e-12
NM_RESTART_SCALE = 0.1

GRID_L_RANGE = (1, 200)
GRID_R_STEP = 0.01
GRID_H_STEP = 0.01
GRID_PSI_RANGE = (0.90, 0.999)
GRID_PSI_STEP = 0.005
GRID_MAX_FAILURE_FRACTION = 0.01

# Spectral efficiency in no-ACI mode uses this fractional power bandwidth.
NO_ACI_PSI = 0.99

# ============================================================
# 🌐 SCENARIO PRESETS
# ============================================================

REFERENCE_SYSTEM = {
    "M": 50,
    "r_ex": 0.25,
    "r_net": 2.0,
    "alpha": 3.0,
    "snr_db": 10.0,
    "duty_factor": 1.0,
    "sigma_s_db": 8.0,
    "m0": 4,
    "m_i": 1.0,
    "x0_distance": 1.0,
}

# Optimum of the r_net = 2, sigma_s = 8 dB, mixed-fading system: (L, R, h, psi).
REFERENCE_WAVEFORM = (38.0, 0.64, 0.81, 0.96)

FADING_MODELS = {
    "rayleigh": {"m0": 1, "m_i": 1.0},
    "nakagami": {"m0": 4, "m_i": 4.0},
    "mixed": {"m0": 4, "m_i": 1.0},
}

SWEEP_L_VALUES = [1, 2, 5, 10, 15, 20, 30, 40, 50, 60, 80, 100, 150, 200]
SWEEP_L_PSI_VALUES = [0.96, 0.99]
SWEEP_PSI_VALUES = [0.93, 0.94, 0.95, 0.96, 0.97, 0.98, 0.99]
FIG3_R_VALUES = [0.25, 0.5, 0.75, 1.0]
FIG3_ALPHAS = [3.0, 3.5, 4.0]

# ============================================================
# 🧩 LOGGING & DEBUG SETTINGS
# ============================================================

DEBUG_MODE = os.getenv("DEBUG_MODE", "false").lower() == "true"
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
SHOW_PROGRESS = os.getenv("SHOW_PROGRESS", "true").lower() == "true"
