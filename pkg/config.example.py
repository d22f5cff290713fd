"""
Settings template for the PQ diffusion toolkit
COPY THIS FILE TO config.py AND EDIT IF THE DEFAULTS DO NOT SUIT YOUR MACHINE

cp config.example.py config.py   (Linux/Mac)
copy config.example.py config.py (Windows)

Every value can also be set from the environment (PQD_* variables).
"""
import os

import psutil

# ================= OUTPUT CONFIGURATION =================
# Result tables (*.csv) and plot scripts (*.gp) go here unless --out is given
OUTPUT_DIRECTORY = os.getenv('PQD_OUTPUT_DIR', os.path.join(os.path.dirname(__file__), "results"))
ARTIFACT_VERSION = "1.0.0"
CSV_SIGNIFICANT_DIGITS = 9

# ================= LOGGING CONFIGURATION =================
LOG_DIRECTORY = os.getenv('PQD_LOG_DIR', os.path.join(os.path.dirname(__file__), "logs"))
VERBOSE = os.getenv('PQD_VERBOSE', '0') == '1'

# ================= NUMERICS =================
# Integration step (1/Gamma). Convergence is checked by halving, so keep it small
DEFAULT_DT = float(os.getenv('PQD_DT', '1e-3'))

# Norm guard for the linear QSD equation
DIVERGENCE_GUARD = float(os.getenv('PQD_DIVERGENCE_GUARD', '1e6'))

# More than this fraction of divergent trajectories fails the run (exit code 3)
DIVERGENT_FRACTION_LIMIT = 0.01

# Coarsening of the analytic double integrals (1 = full grid)
ANALYTIC_COARSEN = int(os.getenv('PQD_ANALYTIC_COARSEN', '4'))

DEFAULT_OUTPUT_ROWS = 400

# ================= PARALLELISM =================
# Increase on large machines; results do not depend on this value
DEFAULT_THREADS = int(os.getenv('PQD_THREADS', str(psutil.cpu_count(logical=False) or 1)))
CHUNK_SIZE = 64
