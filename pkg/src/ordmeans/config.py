"""Configuration: numerical defaults, bootstrap limits and environment overrides."""

import os
from pathlib import Path

_PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent

# Load .env from project root so ORDMEANS_* overrides are visible below.
try:
    from dotenv import load_dotenv

    _env_file = _PROJECT_ROOT / ".env"
    if _env_file.exists():
        load_dotenv(_env_file)
except ImportError:
    pass


def _env_int(name: str, default: int, lo: int, hi: int) -> int:
    raw = os.getenv(name, str(default)).strip()
    try:
        return max(lo, min(hi, int(raw)))
    except ValueError:
        return default


# Stopping threshold 10^-m with m = 3
DEFAULT_TOL = 1e-3

DEFAULT_MAX_ITER = _env_int("ORDMEANS_MAX_ITER", 500, 1, 1_000_000)

# Replicate count used in the application (M = 20000)
DEFAULT_REPLICATES = _env_int("ORDMEANS_REPLICATES", 20000, 1, 10_000_000)

DEFAULT_SEED = 1

# Parallel bootstrap workers (1 = sequential, in-process)
BOOTSTRAP_WORKERS = _env_int("ORDMEANS_WORKERS", 1, 1, 64)

# Replicate index ranges handed to each worker; results do not depend on it
REPLICATE_CHUNKS_PER_WORKER = 4

# Warn when more than this fraction of bootstrap replicates fail to fit
MAX_FAILURE_RATE = 0.01

# Absolute step tolerance (relative to 1 + |mu|) for the H0 profile root
ROOT_XTOL = 1e-12

# Grid used to locate the global maximum before bisection when Newton fails
PROFILE_GRID_POINTS = 2001

# Half-width margin of the compact mean box D_a
AIM_MEAN_MARGIN = 1.0
