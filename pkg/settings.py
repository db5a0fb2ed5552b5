import os
from dotenv import load_dotenv
import logfire

# Load environment variables
load_dotenv()

# Numerical tolerances shared by every module
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
SUPPORT_TOL = 1e-12
REAL_TOL = 1e-10
EIG_NOISE = 1e-14
CLAMP_TOL = 1e-10
STEP_PSD_TOL = 1e-6
CORRECTION_BUDGET = 1e-6
BISECTION_TOL = 1e-8
VALIDITY_TOL = 1e-6

DEFAULT_DT = 1e-3
DEFAULT_WORKERS = 3

_LOG_LEVELS = ('trace', 'debug', 'info', 'notice', 'warn', 'error', 'fatal')


def get_default_dt():
    """
    Retrieve the default Runge-Kutta step from the environment.

    Raises:
        ValueError: If ISLKIT_DT is set but is not a positive number
    """
    raw = os.getenv('ISLKIT_DT')
    if raw is None or raw.strip() == '':
        return DEFAULT_DT
    if not validate_dt(raw):
        raise ValueError(f"ISLKIT_DT must be a positive number, got {raw!r}")
    return float(raw)


def validate_dt(value):
    """
    Validate a time step coming from configuration.

    Args:
        value: Number or string to validate

    Returns:
        bool: True if the value parses to a finite positive float
    """
    try:
        dt = float(value)
    except (TypeError, ValueError):
        return False
    return dt > 0 and dt != float('inf')


def get_max_workers():
    """
    Retrieve the concurrency limit for figure sweeps.

    Raises:
        ValueError: If ISLKIT_WORKERS is not a positive integer
    """
    raw = os.getenv('ISLKIT_WORKERS')
    if not raw:
        return DEFAULT_WORKERS
    if not raw.isdigit() or int(raw) < 1:
        raise ValueError(f"ISLKIT_WORKERS must be a positive integer, got {raw!r}")
    return int(raw)


def get_log_level():
    """
    Retrieve the minimum console log level.

    Raises:
        ValueError: If ISLKIT_LOG_LEVEL is not a logfire level name
    """
    level = os.getenv('ISLKIT_LOG_LEVEL', 'info').lower()
    if level not in _LOG_LEVELS:
        raise ValueError(f"ISLKIT_LOG_LEVEL must be one of {', '.join(_LOG_LEVELS)}, got {level!r}")
    return level


def configure_logging(level=None):
    """Configure logfire; console output stays off unless ISLKIT_LOG_CONSOLE=1."""
    if level is None:
        level = get_log_level()
    console = False
    if os.getenv('ISLKIT_LOG_CONSOLE') == '1':
        console = logfire.ConsoleOptions(min_log_level=level)
    logfire.configure(
        send_to_logfire='if-token-present',
        service_name='islkit',
        console=console,
    )


# a bad level is reported by the command line with exit code 2
try:
    configure_logging()
except ValueError:
    configure_logging('info')
