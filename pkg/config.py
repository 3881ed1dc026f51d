import os
import logging
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def _env_float(name, default):
    value = os.environ.get(name)
    if value is None or value == "":
        return default
    try:
        return float(value)
    except ValueError:
        logging.error(f"Ignoring non-numeric value for {name}: {value!r}")
        return default


def _env_int(name, default):
    return int(_env_float(name, default))


def _env_grid(name, default):
    value = os.environ.get(name)
    if not value:
        return default
    try:
        return tuple(float(item) for item in value.split(","))
    except ValueError:
        logging.error(f"Ignoring malformed grid for {name}: {value!r}")
        return default


# --- Logging ---
LOG_LEVEL = os.environ.get("MAPSEARCH_LOG_LEVEL", "INFO")
LOG_FILE = os.environ.get("MAPSEARCH_LOG_FILE", "mapsearch.log")

# --- Network validation ---
# Absolute tolerance on the row sums of every CPT.
CPT_TOLERANCE = _env_float("MAPSEARCH_CPT_TOLERANCE", 1e-9)

# --- Search parameters ---
# One evaluation = one O(n exp(w)) pass over the network.
DEFAULT_BUDGET = _env_int("MAPSEARCH_DEFAULT_BUDGET", 150)

# Random moves taken after a peak. The optimal hill is usually 2 or 3 moves away.
RESTART_WALK_LENGTH = _env_int("MAPSEARCH_RESTART_WALK_LENGTH", 3)

# Margin (natural log) a neighbour must beat the current score by to count as better.
SCORE_EPSILON = _env_float("MAPSEARCH_SCORE_EPSILON", 1e-12)

# --- Exact inference ---
# Largest joint table the enumeration oracle is allowed to build.
BRUTE_FORCE_LIMIT = _env_int("MAPSEARCH_BRUTE_FORCE_LIMIT", 2 ** 24)

# Constrained width above which exact MAP is skipped.
WIDTH_CAP = _env_int("MAPSEARCH_WIDTH_CAP", 22)

# Relative tolerance for "solved correctly".
SOLVED_RTOL = _env_float("MAPSEARCH_SOLVED_RTOL", 1e-9)

# --- Generation parameters ---
MAX_MAP_VARS = _env_int("MAPSEARCH_MAX_MAP_VARS", 25)
MIN_MAP_ROOTS = _env_int("MAPSEARCH_MIN_MAP_ROOTS", 10)
# Chance that a connectivity-generated variable after the first is a root.
ROOT_PROBABILITY = _env_float("MAPSEARCH_ROOT_PROBABILITY", 0.3)

# --- Experiment scale ---
DESK_INSTANCES = _env_int("MAPSEARCH_DESK_INSTANCES", 100)
FULL_SCALE_INSTANCES = _env_int("MAPSEARCH_FULL_SCALE_INSTANCES", 1000)
BIAS_GRID = _env_grid("MAPSEARCH_BIAS_GRID", (0.0, 0.125, 0.25, 0.375, 0.5))
WORKERS = _env_int("MAPSEARCH_WORKERS", 1)

# The eleven algorithms of the solution-quality tables, in table order.
QUALITY_METHODS = (
    "Rand-Hill", "Rand-Taboo",
    "ML", "ML-Hill", "ML-Taboo",
    "MPE", "MPE-Hill", "MPE-Taboo",
    "Seq", "Seq-Hill", "Seq-Taboo",
)
