import logging, math
from dataclasses import dataclass

from densities import densitySlopeInVolume
from errors import InvalidVolumesError, ModelViolationError, UndefinedQuantityError

logger = logging.getLogger(__name__)


@dataclass
class EquilibriumSolution:
    v_tilde: float
    residual: float
    bracket: tuple
    scale: float = 1.0


@dataclass
class VStarSolution:
    v_star: float
    residual: float
    bracket: tuple
    scale: float = 1.0


def checkVolumes(V1, V2):
    if not (math.isfinite(V1) and math.isfinite(V2)):
        raise InvalidVolumesError("volumes must be finite, got V1 = " + repr(V1) + ", V2 = " + repr(V2))
    if not 0 < V1 <= V2:
        raise InvalidVolumesError("volumes must satisfy 0 < V1 <= V2, got V1 = " + repr(V1) + ", V2 = " + repr(V2))


def bisect(function, lo, hi, params, name="root", slack=0.0):
    """
    Root of a nondecreasing function by bisection

    Args:
        function (callable): nondecreasing in its argument
        lo (float): lower end, function(lo) <= 0
        hi (float): upper end, function(hi) >= 0
        params (dict): parameter dictionary (Root Tolerance, Root Max Iterations)
        name (str): label for error messages
        slack (float): end values within slack of the wrong sign count as roots

    Returns:
        tuple: (root, (lo, hi)) with the final bracket
    """
    flo = function(lo)
    fhi = function(hi)
    if flo > slack or fhi < -slack:
        raise ModelViolationError(name + ": no sign change on [" + repr(lo) + ", " + repr(hi) + "], values "
                                  + repr(flo) + " and " + repr(fhi))
    if flo >= 0:
        return lo, (lo, lo)
    if fhi <= 0:
        return hi, (hi, hi)

    tolerance = params["Root Tolerance"]
    for _ in range(params["Root Max Iterations"]):
        if hi - lo <= tolerance * (1 + max(abs(lo), abs(hi))):
            break
        mid = (lo + hi) / 2
        if mid <= lo or mid >= hi:
            break
        fmid = function(mid)
        if fmid == 0:
            return mid, (mid, mid)
        if fmid < 0:
            lo = mid
        else:
            hi = mid

    return (lo + hi) / 2, (lo, hi)


def _endpointScale(model, bracket, offsets):
    # max(1, |f'|) over every slope the balance evaluates at either end of the bracket
    return max([1.0] + [abs(densitySlopeInVolume(model, end + offset)) for end in bracket for offset in offsets])


def _checkResidual(residual, scale, params, name):
    if abs(residual) > params["Residual Tolerance"] * scale:
        logger.warning("%s residual %r above tolerance (scale %r)", name, residual, scale)


def solveEquilibrium(model, V1, V2):
    """
    Leftmost endpoint of the double interval: the root of f'(t) + f'(t + V1) + f'(t + V1 + V2) = 0

    Args:
        model (DensityModel): validated density
        V1 (float): smaller volume
        V2 (float): larger volume

    Returns:
        EquilibriumSolution: root, residual and final bracket
    """
    checkVolumes(V1, V2)

    def balance(t):
        return (densitySlopeInVolume(model, t) + densitySlopeInVolume(model, t + V1)
                + densitySlopeInVolume(model, t + V1 + V2))

    # V1 = V2 puts the root on the left end, so widen it by a few ulps
    lo = -(V1 + V2) / 2
    lo -= 4 * math.ulp(lo)
    root, bracket = bisect(balance, lo, 0.0, model.params, "equilibrium", model.params["Residual Tolerance"])

    scale = _endpointScale(model, (lo, 0.0), (0.0, V1, V1 + V2))
    residual = balance(root)
    _checkResidual(residual, scale, model.params, "equilibrium")
    return EquilibriumSolution(root, residual, bracket, scale)


def solveVStar(model, L, V1):
    """
    Limit of the equilibrium endpoint as V2 grows: the root of f'(t) + f'(t + V1) = -L

    Args:
        model (DensityModel): validated density
        L (float): finite asymptotic slope
        V1 (float): smaller volume

    Returns:
        VStarSolution: root, residual and final bracket
    """
    L = float(L)
    if not math.isfinite(L):
        raise UndefinedQuantityError("V* is undefined when L is infinite")
    if not (V1 > 0 and math.isfinite(V1)):
        raise InvalidVolumesError("V1 must be positive and finite, got " + repr(V1))

    def balance(t):
        return densitySlopeInVolume(model, t) + densitySlopeInVolume(model, t + V1) + L

    hi = -V1
    step = max(1.0, V1)
    lo = hi - step
    intDoublings = 0
    while balance(lo) >= 0:
        intDoublings += 1
        if intDoublings > model.params["Doubling Cap"]:
            raise ModelViolationError("V*: f'(t) + f'(t + V1) never falls below -L")
        step *= 2
        lo = hi - step

    root, bracket = bisect(balance, lo, hi, model.params, "V*", model.params["Residual Tolerance"])
    scale = max(abs(L), _endpointScale(model, (lo, hi), (0.0, V1)))
    residual = balance(root)
    _checkResidual(residual, scale, model.params, "V*")
    return VStarSolution(root, residual, bracket, scale)


def inverseSlope(model, y, L):
    """
    (f')^-1(y): the V >= 0 with f'(V) = y, for 0 <= y < L

    Args:
        model (DensityModel): validated density
        y (float): target slope
        L (float): asymptotic slope

    Returns:
        float: volume coordinate with slope y
    """
    if not 0 <= y < float(L):
        raise UndefinedQuantityError("slope " + repr(y) + " is not in [0, L) with L = " + repr(float(L)))
    if y == 0:
        return 0.0

    def excess(t):
        return densitySlopeInVolume(model, t) - y

    hi = 1.0
    intDoublings = 0
    while excess(hi) < 0:
        intDoublings += 1
        if intDoublings > model.params["Doubling Cap"]:
            raise ModelViolationError("f' never reaches " + repr(y))
        hi *= 2

    root, _ = bisect(excess, 0.0, hi, model.params, "inverse slope")
    return root
