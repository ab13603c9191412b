import json, os, logging

from errors import ConfigError

# Tolerances, thresholds and sweep sizes shared by every module.
# Kept as a flat dictionary of Title Case keys so a single JSON file can override any of them
# (passed via --config, or through the BUBBLELINE_CONFIG environment variable)

logger = logging.getLogger(__name__)

CONFIG_ENV = "BUBBLELINE_CONFIG"

defaultParams = {
    # density_core: volume transform
    "Quadrature Tolerance": 1e-12,
    "Interpolation Tolerance": 1e-10,
    "Transform Step": 1 / 32,
    "Position Cap": 1e3,
    "Newton Max Iterations": 60,

    # density_core: validation
    "Validation Exponent": 10,
    "Volume Unit": 1.0,
    "Symmetry Tolerance": 1e-10,
    "Slope Origin Tolerance": 1e-8,
    "Kink Tolerance": 1e-8,

    # limits
    "Limit Max Exponent": 50,
    "Convergence Tolerance": 1e-9,
    "Convergence Window": 3,
    "Divergence Threshold": 1e9,
    "Divergence Ratio": 0.999,
    "Divergence Window": 8,
    "Divergence Start": 10,
    "Limit Precision": 40,

    # equilibrium
    "Root Tolerance": 1e-13,
    "Root Max Iterations": 400,
    "Residual Tolerance": 1e-10,

    # bubbles
    "Blowup Tolerance": 1e-10,
    "Doubling Cap": 60,
    "Tie Tolerance": 1e-9,
    "Tie Clamp Margin": 1e-3,
    "Rounding Floor": 64,

    # oracle
    "Oracle Max Intervals": 3,
    "Oracle Levels": 8,
    "Oracle Refinement": 4,
    "Oracle Sweep Cap": 400,
    "Oracle Time Budget": 30.0,

    # sweeps
    "Workers": 1,
}


def getParams(overrides=None):
    """
    Build a fresh parameter dictionary from the defaults, applying any overrides

    Args:
        overrides (dict): optional mapping of parameter names to values

    Returns:
        dict: copy of defaultParams with the overrides applied
    """

    dictParams = dict(defaultParams)
    if not overrides:
        return dictParams

    for key, value in overrides.items():
        if key not in defaultParams:
            raise ConfigError("unknown parameter: " + repr(key))

        # Keep integers integers and floats floats, so "Oracle Levels": 8.0 still indexes ranges
        if isinstance(defaultParams[key], int) and not isinstance(defaultParams[key], bool):
            if float(value) != int(value):
                raise ConfigError("parameter " + repr(key) + " must be an integer, got " + repr(value))
            dictParams[key] = int(value)
        else:
            dictParams[key] = float(value)

    return dictParams


def loadParams(path=None):
    """
    Read parameter overrides from a JSON file, falling back to the BUBBLELINE_CONFIG environment variable

    Args:
        path (str): JSON file holding an object of overrides, or None

    Returns:
        dict: full parameter dictionary
    """

    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return getParams()

    logger.info("Loading parameters from %s", path)
    try:
        with open(path, mode='r', encoding='UTF-8') as config_file:
            overrides = json.load(config_file)
    except (OSError, ValueError) as error:
        raise ConfigError("cannot read config " + str(path) + ": " + str(error))

    if not isinstance(overrides, dict):
        raise ConfigError("config " + str(path) + " must hold a JSON object")

    return getParams(overrides)
