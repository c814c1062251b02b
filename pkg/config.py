"""
Runtime configuration for the Abel toolkit.

Every tunable comes from the environment (optionally a .env file next to the
repository). See .env.example for the full list of keys.
"""

import os
import logging

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    # dotenv not available, will use environment variables directly
    pass


def _env_int(key: str, default: int, minimum: int = 1) -> int:
    raw = os.getenv(key, str(default))
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{key} must be an integer, got {raw!r}")
    if value < minimum:
        raise ValueError(f"{key} must be >= {minimum}, got {value}")
    return value


def _env_float(key: str, default: float) -> float:
    raw = os.getenv(key, str(default))
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"{key} must be a number, got {raw!r}")
    if value <= 0:
        raise ValueError(f"{key} must be positive, got {value}")
    return value


def _env_flag(key: str, default: bool) -> bool:
    raw = os.getenv(key)
    if raw is None:
        return default
    return raw.strip().lower() in {"1", "true", "yes", "on"}


# =========================
# 1) PATHS
# =========================
BASE_DIR = os.path.dirname(os.path.abspath(__file__))
CATALOG_PATH = os.getenv("ABEL_CATALOG_PATH", os.path.join(BASE_DIR, "data", "catalog.json"))

# =========================
# 2) SYMBOLIC ENGINE
# =========================
# Sampled zero testing: N random rational points, P-digit arithmetic,
# a value counts as zero below 10^(-P/2).
SAMPLE_POINTS = _env_int("ABEL_SAMPLE_POINTS", 6)
SAMPLE_DIGITS = _env_int("ABEL_SAMPLE_DIGITS", 30, minimum=10)
STRICT_SYMBOLS = _env_flag("ABEL_STRICT_SYMBOLS", False)
# Run the sampled check next to the exact one when verifying first integrals
CROSSCHECK = _env_flag("ABEL_CROSSCHECK", True)

# =========================
# 3) NUMERIC DEFAULTS
# =========================
RTOL = _env_float("ABEL_RTOL", 1e-10)
ATOL = _env_float("ABEL_ATOL", 1e-12)
POLE_RADIUS = _env_float("ABEL_POLE_RADIUS", 1e-6)
NUMERIC_DIGITS = _env_int("ABEL_NUMERIC_DIGITS", 20, minimum=15)

# =========================
# 4) EXECUTION
# =========================
WORKERS = _env_int("ABEL_WORKERS", 1)
SEED = _env_int("ABEL_SEED", 20240601, minimum=0)

# =========================
# 5) LOGGING
# =========================
LOG_LEVEL = os.getenv("ABEL_LOG_LEVEL", "WARNING").upper()
logging.basicConfig(
    level=getattr(logging, LOG_LEVEL, logging.WARNING),
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)
