import logging, math, sys
from dataclasses import dataclass
from enum import Enum

from densities import ExtendedReal, densityInVolume
from equilibrium import bisect, checkVolumes, inverseSlope, solveEquilibrium, solveVStar
from errors import NoTieError, TieBracketError, UndefinedQuantityError
from limits import Verdict

logger = logging.getLogger(__name__)


class Minimizer(Enum):
    DOUBLE = "Double"
    TRIPLE = "Triple"
    TIE = "Tie"


class Regime(Enum):
    ALWAYS_DOUBLE = "AlwaysDouble"
    FINITE_BLOWUP = "FiniteBlowup"
    NO_BLOWUP = "NoBlowup"


@dataclass
class BubbleAnalysis:
    V1: float
    V2: float
    v_tilde: float
    P2: float
    P3: float
    mu: float
    verdict: Minimizer
    residual: float = 0.0


@dataclass
class BlowupResult:
    """
    V0 with its final bracket. mu_limit is negative at bracket[0] (or tends to s0 < 0 there when it is 0)
    and nonnegative at bracket[1]
    """
    V0: ExtendedReal
    bracket: tuple
    regime: Regime
    s0: float = None


@dataclass
class TieCurve:
    V0: ExtendedReal
    V0_bracket: tuple
    regime: Regime
    samples: list  # (V1, lambda, mu at the tie)


##### Perimeters #####

def _doubleInterval(model, V1, V2):
    solution = solveEquilibrium(model, V1, V2)
    t = solution.v_tilde
    P2 = densityInVolume(model, t) + densityInVolume(model, t + V1) + densityInVolume(model, t + V1 + V2)
    return P2, solution


def perimeterDouble(model, V1, V2):
    """
    Weighted perimeter of the double interval in equilibrium, f at its three boundary points
    """
    return _doubleInterval(model, V1, V2)[0]


def perimeterTriple(model, V1, V2):
    """
    Weighted perimeter of the triple interval: a central V1 interval flanked by V2/2 on each side
    """
    checkVolumes(V1, V2)
    return 2 * densityInVolume(model, V1 / 2) + 2 * densityInVolume(model, (V1 + V2) / 2)


def mu(model, V1, V2):
    return perimeterTriple(model, V1, V2) - perimeterDouble(model, V1, V2)


def roundingFloor(model, P2, P3):
    """
    Smallest |mu| whose sign survives the rounding of P3 - P2
    """
    return model.params["Rounding Floor"] * sys.float_info.epsilon * (abs(P2) + abs(P3))


def _resolvedMu(model, V1, V2):
    P2 = perimeterDouble(model, V1, V2)
    P3 = perimeterTriple(model, V1, V2)
    return P3 - P2, roundingFloor(model, P2, P3)


def muLadder(model, V1, exponents):
    """
    mu(V1, 2^k) for each requested k, the large-V2 approach to mu_limit

    Args:
        model (DensityModel): validated density
        V1 (float): smaller volume
        exponents (iterable): exponents k with 2^k >= V1

    Returns:
        list: list of (V2, mu) pairs
    """
    return [(2.0 ** k, mu(model, V1, 2.0 ** k)) for k in exponents]


##### Limits of mu #####

def _checkFiniteL(profile):
    if profile.L_verdict == Verdict.DECLARED_INFINITE or profile.L.is_infinite():
        raise UndefinedQuantityError("mu_limit needs a finite L; L = inf gives V0 = inf directly")


def _infiniteM(profile):
    return profile.M_verdict == Verdict.DECLARED_INFINITE or profile.M.is_infinite()


def muLimit(model, profile, V1):
    """
    Limit of mu(V1, V2) as V2 grows: 2f(V1/2) - f(V*) - f(V* + V1) - V* L - M, or -inf when M = inf

    Args:
        model (DensityModel): validated density
        profile (AsymptoticProfile): L and M
        V1 (float): smaller volume

    Returns:
        ExtendedReal: the limit
    """
    _checkFiniteL(profile)
    if _infiniteM(profile):
        return ExtendedReal.infinity(-1)
    L = float(profile.require("L"))
    M = profile.require("M")

    vStar = solveVStar(model, L, V1).v_star
    value = (2 * densityInVolume(model, V1 / 2) - densityInVolume(model, vStar)
             - densityInVolume(model, vStar + V1) - vStar * L - float(M))
    return ExtendedReal(value)


def muLimitAtZero(model, profile):
    """
    Limit of mu_limit(V1) as V1 -> 0: 2f(0) - 2f(V) + V L - M with V = (f')^-1(L/2).
    V0 = 0 exactly when this is nonnegative
    """
    _checkFiniteL(profile)
    if _infiniteM(profile):
        return -math.inf
    L = float(profile.require("L"))
    M = profile.require("M")
    V = inverseSlope(model, L / 2, L)
    return 2 * densityInVolume(model, 0.0) - 2 * densityInVolume(model, V) + V * L - float(M)


def blowupTime(model, profile):
    """
    V0 = inf{V1 : mu_limit(V1) >= 0}, the edge of the region where triple intervals can win

    Args:
        model (DensityModel): validated density
        profile (AsymptoticProfile): L and M

    Returns:
        BlowupResult: V0, bracket, regime and the limit at zero
    """
    # V0 = inf exactly when M = inf, whatever L's verdict
    if _infiniteM(profile):
        return BlowupResult(ExtendedReal.infinity(), (math.inf, math.inf), Regime.NO_BLOWUP)

    profile.require("M")
    s0 = muLimitAtZero(model, profile)
    if s0 >= 0:
        return BlowupResult(ExtendedReal(0.0), (0.0, 0.0), Regime.ALWAYS_DOUBLE, s0)

    def limitAt(V1):
        return float(muLimit(model, profile, V1))

    lo = 0.0
    hi = 1.0
    intDoublings = 0
    while limitAt(hi) < 0:
        intDoublings += 1
        if intDoublings > model.params["Doubling Cap"]:
            raise TieBracketError("mu_limit stays negative up to V1 = " + repr(hi))
        lo = hi
        hi *= 2

    tolerance = model.params["Blowup Tolerance"]
    while hi - lo > tolerance:
        mid = (lo + hi) / 2
        if mid <= lo or mid >= hi:
            break
        if limitAt(mid) < 0:
            lo = mid
        else:
            hi = mid

    logger.info("Blowup time V0 = %r, bracket [%r, %r]", (lo + hi) / 2, lo, hi)
    return BlowupResult(ExtendedReal((lo + hi) / 2), (lo, hi), Regime.FINITE_BLOWUP, s0)


##### Tie function #####

def tieVolume(model, profile, blowup, V1):
    """
    lambda(V1): the V2 > V1 with mu(V1, V2) = 0, defined for 0 < V1 < V0

    Args:
        model (DensityModel): validated density
        profile (AsymptoticProfile): L and M
        blowup (BlowupResult): blowup time of the same density, computed from profile when None
        V1 (float): smaller volume

    Returns:
        float: tie volume
    """
    if blowup is None:
        blowup = blowupTime(model, profile)
    if not V1 > 0:
        raise UndefinedQuantityError("lambda needs V1 > 0, got " + repr(V1))
    if V1 >= float(blowup.V0):
        raise NoTieError("no tie at V1 = " + repr(V1) + ": the double interval wins for every V2 once V1 >= V0 = "
                         + blowup.V0.to_text())

    # Both ends of the bisection bracket must carry a sign that rounding cannot flip
    lo = V1
    hi = 2 * V1
    cap = 2.0 ** model.params["Doubling Cap"]
    while True:
        gap, floor = _resolvedMu(model, V1, hi)
        if abs(gap) <= floor:
            raise TieBracketError("sign of mu(V1, V2) lost in rounding at V2 = " + repr(hi) + " (|mu| = "
                                  + repr(abs(gap)) + " <= " + repr(floor) + ") for V1 = " + repr(V1))
        if gap < 0:
            break
        lo = hi
        hi *= 2
        if hi > cap:
            raise TieBracketError("mu(V1, V2) stays nonnegative up to V2 = " + repr(cap) + " at V1 = " + repr(V1))

    root, _ = bisect(lambda V2: -mu(model, V1, V2), lo, hi, model.params, "tie volume")
    return root


def classify(model, profile, V1, V2, blowup=None):
    """
    Which configuration minimizes perimeter at (V1, V2): Triple when mu < 0, Double when mu > 0,
    Tie within the band tie_tol * (1 + P2). At V1 >= V0 a Tie resolves to Double

    Args:
        model (DensityModel): validated density
        profile (AsymptoticProfile): L and M, used only to resolve a Tie
        V1 (float): smaller volume
        V2 (float): larger volume
        blowup (BlowupResult): precomputed blowup time, optional

    Returns:
        BubbleAnalysis: all intermediate quantities and the verdict
    """
    P2, solution = _doubleInterval(model, V1, V2)
    P3 = perimeterTriple(model, V1, V2)
    gap = P3 - P2
    band = model.params["Tie Tolerance"] * (1 + abs(P2))

    if gap < -band:
        verdict = Minimizer.TRIPLE
    elif gap > band:
        verdict = Minimizer.DOUBLE
    else:
        verdict = Minimizer.TIE
        if blowup is None and profile is not None:
            blowup = blowupTime(model, profile)
        if blowup is not None and V1 >= float(blowup.V0):
            verdict = Minimizer.DOUBLE

    return BubbleAnalysis(V1, V2, solution.v_tilde, P2, P3, gap, verdict, solution.residual)
