"""
Process-wide settings for the PQ diffusion toolkit
Run parameters live in the *.cfg recipes; this file holds the defaults
that apply to every run. Each value can be overridden from the environment.
"""
import os

import psutil

# ================= OUTPUT CONFIGURATION =================
# Directory where result tables and plot scripts are written
OUTPUT_DIRECTORY = os.getenv('PQD_OUTPUT_DIR', os.path.join(os.path.dirname(__file__), "results"))

# Version string embedded in every result file header
ARTIFACT_VERSION = "1.0.0"

# Significant digits for floating-point CSV columns
CSV_SIGNIFICANT_DIGITS = 9

# ================= LOGGING CONFIGURATION =================
# Directory where log files will be saved
LOG_DIRECTORY = os.getenv('PQD_LOG_DIR', os.path.join(os.path.dirname(__file__), "logs"))

# Enable verbose (DEBUG) logging and progress bars
VERBOSE = os.getenv('PQD_VERBOSE', '0') == '1'

# ================= NUMERICS =================
# Nominal integration step in units of 1/Gamma
DEFAULT_DT = float(os.getenv('PQD_DT', '1e-3'))

# Trajectories whose state norm exceeds this are flagged divergent
DIVERGENCE_GUARD = float(os.getenv('PQD_DIVERGENCE_GUARD', '1e6'))

# Fraction of divergent trajectories above which a run is marked failed
DIVERGENT_FRACTION_LIMIT = 0.01

# Keep every n-th integration point for the analytic double integrals
ANALYTIC_COARSEN = int(os.getenv('PQD_ANALYTIC_COARSEN', '4'))

# Approximate number of rows in a result table when run.sample_every is not set
DEFAULT_OUTPUT_ROWS = 400

# ================= PARALLELISM =================
# Worker processes for trajectory ensembles (physical cores by default)
DEFAULT_THREADS = int(os.getenv('PQD_THREADS', str(psutil.cpu_count(logical=False) or 1)))

# Trajectories per work unit. Fixed so results do not depend on the worker count
CHUNK_SIZE = 64
