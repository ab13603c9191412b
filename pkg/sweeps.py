import logging, math, time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from bubbles import (Regime, TieCurve, classify, mu, muLadder, muLimit, perimeterTriple, roundingFloor, tieVolume)
from densities import densityInVolume
from equilibrium import solveEquilibrium, solveVStar
from errors import NoTieError, TieBracketError, UsageError
from limits import Verdict

logger = logging.getLogger(__name__)


@dataclass
class PhaseRow:
    V1: float
    V2: float
    mu: float
    P2: float
    P3: float
    verdict: str


@dataclass
class PropertyCheck:
    name: str
    passed: bool
    witness: object = None
    detail: str = ""


##### Grid iteration #####

def getSize(grid):
    """
    Number of points in the full cartesian product of a grid dictionary
    """
    return int(np.prod([len(values) for values in grid.values()]))


def getItem(grid, ind):
    """
    The ind-th point of the cartesian product, keys in sorted order with the last key cycling fastest

    Args:
        grid (dict): mapping of names to value lists
        ind (int): position in the iteration

    Returns:
        dict: one value per key
    """
    if ind >= getSize(grid):
        raise IndexError("grid index out of range")

    # Reverse so the most frequently cycling key comes first
    keys, valuesList = zip(*sorted(grid.items())[::-1])
    out = {}
    for key, values in zip(keys, valuesList):
        ind, offset = divmod(ind, len(values))
        out[key] = values[offset]
    return out


def _runParallel(function, items, workers, label):
    lstResults = []
    startTime = time.monotonic()
    intTotal = len(items)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        for i, result in enumerate(executor.map(function, items)):
            lstResults.append(result)
            if i % 16 == 0:
                logger.info("    %s %d / %d completed | %d seconds elapsed", label, i, intTotal,
                            round(time.monotonic() - startTime))
    return lstResults


##### Phase diagram #####

def phaseAxis(extent, intGrid):
    return [float(v) for v in np.linspace(extent / intGrid, extent, intGrid)]


def phaseDiagram(model, profile, blowup, v1Max, v2Max, intGrid):
    """
    Classify every grid point with V1 <= V2

    Args:
        model (DensityModel): validated density
        profile (AsymptoticProfile): L and M
        blowup (BlowupResult): blowup time, resolves ties at V1 >= V0
        v1Max (float): largest V1
        v2Max (float): largest V2
        intGrid (int): points per axis, at least 2

    Returns:
        list: PhaseRows sorted by (V1, V2)
    """
    if not (v1Max > 0 and v2Max > 0):
        raise UsageError("phase extents must be positive")
    if intGrid < 2:
        raise UsageError("phase grid needs at least 2 points per axis")

    grid = {"V1": phaseAxis(v1Max, intGrid), "V2": phaseAxis(v2Max, intGrid)}
    lstPoints = [getItem(grid, i) for i in range(getSize(grid))]
    lstPoints = [point for point in lstPoints if point["V1"] <= point["V2"]]
    logger.info("%d phase points to classify", len(lstPoints))

    def row(point):
        analysis = classify(model, profile, point["V1"], point["V2"], blowup)
        return PhaseRow(analysis.V1, analysis.V2, analysis.mu, analysis.P2, analysis.P3, analysis.verdict.value)

    return _runParallel(row, lstPoints, model.params["Workers"], "phase")


##### Tie curve #####

def tieCurveAxis(blowup, v1Min, v1Max, intSamples):
    """
    Sample points for lambda: geometric in V0 - V1 when V0 is finite, geometric in V1 otherwise
    """
    if math.isfinite(float(blowup.V0)):
        V0 = float(blowup.V0)
        arrDistance = np.geomspace(V0 - v1Min, V0 - v1Max, intSamples)
        return [float(V0 - d) for d in arrDistance]
    return [float(v) for v in np.geomspace(v1Min, v1Max, intSamples)]


def tieCurve(model, profile, blowup, v1Min, v1Max, intSamples):
    """
    Sample the tie function lambda on (v1Min, v1Max), clamping v1Max below a finite V0

    Args:
        model (DensityModel): validated density
        profile (AsymptoticProfile): L and M
        blowup (BlowupResult): blowup time
        v1Min (float): smallest V1, positive
        v1Max (float): largest V1
        intSamples (int): number of samples

    Returns:
        TieCurve: V0, its bracket, regime and (V1, lambda, mu at the tie) samples
    """
    if blowup.regime == Regime.ALWAYS_DOUBLE:
        raise NoTieError("no tie curve: V0=0")
    if not v1Min > 0:
        raise UsageError("--v1-min must be positive")
    if intSamples < 2:
        raise UsageError("tie curve needs at least 2 samples")

    V0 = float(blowup.V0)
    if math.isfinite(V0):
        limit = min(V0 * (1 - model.params["Tie Clamp Margin"]), blowup.bracket[0])
        if v1Max > limit:
            logger.warning("Clamping v1-max from %r to %r below V0 = %r", v1Max, limit, V0)
            v1Max = limit
    if not v1Min < v1Max:
        raise UsageError("need v1-min < v1-max (after clamping below V0), got " + repr(v1Min) + " and " + repr(v1Max))

    def sample(V1):
        tie = tieVolume(model, profile, blowup, V1)
        return (V1, tie, mu(model, V1, tie))

    lstSamples = _runParallel(sample, tieCurveAxis(blowup, v1Min, v1Max, intSamples),
                              model.params["Workers"], "tie curve")
    return TieCurve(blowup.V0, blowup.bracket, blowup.regime, lstSamples)


def doublingLadder(model, profile, blowup, intSteps):
    """
    lambda at V1 = 2^(j-2) for j = 0..intSteps-1, stopping at the first V1 whose tie cannot be bracketed

    Returns:
        tuple: (list of (V1, lambda) pairs, reason the ladder stopped early or "")
    """
    lstLadder = []
    for V1 in (0.25 * 2.0 ** j for j in range(intSteps)):
        try:
            lstLadder.append((V1, tieVolume(model, profile, blowup, V1)))
        except TieBracketError as error:
            logger.warning("Tie ladder stopped at V1 = %r: %s", V1, error)
            return lstLadder, str(error)
    return lstLadder, ""


def blowupLadder(model, profile, blowup, intSteps=10):
    """
    lambda at V1 = (1 - 2^-j) V0 for j = 1..intSteps, the approach to the vertical asymptote
    """
    V0 = float(blowup.V0)
    return [(V1, tieVolume(model, profile, blowup, V1))
            for V1 in [(1 - 2.0 ** -j) * V0 for j in range(1, intSteps + 1)]]


##### Property suite #####

def _strictlyMonotone(values, margin, sign):
    for i, (a, b) in enumerate(zip(values, values[1:])):
        if not sign * (b - a) > margin:
            return False, i + 1
    return True, None


def verifyProperties(model, profile, blowup, intGrid=5):
    """
    Numerical property suite: the diagonal identity, monotonicity of mu, V~, V* and mu_limit,
    the large-V2 limits, and the tie ladder toward a finite V0

    Args:
        model (DensityModel): validated density
        profile (AsymptoticProfile): L and M
        blowup (BlowupResult): blowup time
        intGrid (int): points per axis of the monotonicity grid

    Returns:
        list: PropertyChecks
    """
    lstChecks = []
    arrVolumes = [float(v) for v in np.geomspace(0.125, 8, max(intGrid, 2))]
    margin = 10 * model.params["Root Tolerance"]
    boolFiniteL = profile.L_verdict == Verdict.CONVERGED and profile.L.is_finite()
    boolFiniteM = profile.M_verdict == Verdict.CONVERGED and profile.M.is_finite()

    # mu(V, V) = 2 f(V/2) - f(0)
    worst = 0.0
    witness = None
    for V in arrVolumes:
        gap = abs(mu(model, V, V) - (2 * densityInVolume(model, V / 2) - densityInVolume(model, 0.0)))
        if gap > worst:
            worst, witness = gap, V
    lstChecks.append(PropertyCheck("diagonal_identity", worst <= 1e-10, witness, "max gap " + repr(worst)))

    # mu decreasing in V2, increasing in V1; V~ decreasing in both
    lstChecks.append(_gridCheck("mu_decreasing_in_V2", arrVolumes, margin,
                                lambda V1, V2: mu(model, V1, V2), axis=2, sign=-1))
    lstChecks.append(_gridCheck("mu_increasing_in_V1", arrVolumes, margin,
                                lambda V1, V2: mu(model, V1, V2), axis=1, sign=1))
    lstChecks.append(_gridCheck("v_tilde_decreasing_in_V2", arrVolumes, margin,
                                lambda V1, V2: solveEquilibrium(model, V1, V2).v_tilde, axis=2, sign=-1))
    lstChecks.append(_gridCheck("v_tilde_decreasing_in_V1", arrVolumes, margin,
                                lambda V1, V2: solveEquilibrium(model, V1, V2).v_tilde, axis=1, sign=-1))

    # V~ <= -V1 whenever V1 <= V2, with equality on the diagonal
    lstAbove = [(V1, V2) for V1 in arrVolumes for V2 in arrVolumes
                if V1 <= V2 and solveEquilibrium(model, V1, V2).v_tilde > -V1 + 1e-9 * (1 + V1)]
    lstChecks.append(PropertyCheck("v_tilde_below_minus_V1", not lstAbove, lstAbove[0] if lstAbove else None))

    if boolFiniteL:
        L = float(profile.L)
        lstStars = [solveVStar(model, L, V1).v_star for V1 in arrVolumes]
        passed, index = _strictlyMonotone(lstStars, margin, -1)
        lstChecks.append(PropertyCheck("v_star_decreasing_in_V1", passed,
                                       None if passed else arrVolumes[index]))

        lstGaps = [(V1, abs(solveEquilibrium(model, V1, 2.0 ** 20).v_tilde - solveVStar(model, L, V1).v_star))
                   for V1 in (0.5, 1.0, 2.0)]
        worstV1, worstGap = max(lstGaps, key=lambda pair: pair[1])
        lstChecks.append(PropertyCheck("v_tilde_tends_to_v_star", worstGap < 1e-4, worstV1,
                                       "gap at V2 = 2^20: " + repr(worstGap)))

    if boolFiniteL and boolFiniteM:
        lstLimits = [float(muLimit(model, profile, V1)) for V1 in arrVolumes]
        boolNondecreasing = all(b >= a - margin * (1 + abs(a)) for a, b in zip(lstLimits, lstLimits[1:]))
        lstChecks.append(PropertyCheck("mu_limit_nondecreasing", boolNondecreasing))

        lstLadder = muLadder(model, 1.0, range(1, 21))
        limit = float(muLimit(model, profile, 1.0))
        # Upward steps within rounding of P3 - P2 do not count against the approach from above
        lstFloors = []
        for V2, value in lstLadder:
            P3 = perimeterTriple(model, 1.0, V2)
            lstFloors.append(roundingFloor(model, P3 - value, P3))
        boolFromAbove = all(b <= a + floorA + floorB for (_, a), (_, b), floorA, floorB
                            in zip(lstLadder, lstLadder[1:], lstFloors, lstFloors[1:]))
        boolFromAbove = boolFromAbove and lstLadder[-1][1] >= limit - 1e-3
        gap = abs(lstLadder[-1][1] - limit)
        lstChecks.append(PropertyCheck("mu_tends_to_mu_limit", boolFromAbove and gap < 1e-3, 1.0,
                                       "gap at V2 = 2^20: " + repr(gap)))

    if blowup.regime == Regime.FINITE_BLOWUP:
        lstLadder = blowupLadder(model, profile, blowup)
        lstTies = [tie for _, tie in lstLadder]
        passed, index = _strictlyMonotone(lstTies, 0.0, 1)
        worstTie = max(abs(mu(model, V1, tie)) for V1, tie in lstLadder)
        boolGrows = lstTies[-1] > 10 * lstTies[0]
        lstChecks.append(PropertyCheck("tie_ladder_toward_V0", passed and boolGrows and worstTie < 1e-8,
                                       None if passed else lstLadder[index][0],
                                       "lambda grows by " + repr(lstTies[-1] / lstTies[0]) + ", worst |mu| "
                                       + repr(worstTie)))

    for check in lstChecks:
        if not check.passed:
            logger.warning("Property %s fails (witness %r) %s", check.name, check.witness, check.detail)
    return lstChecks


def _gridCheck(name, arrVolumes, margin, function, axis, sign):
    # axis 2 walks V2 along rows of fixed V1, axis 1 walks V1 along columns of fixed V2, both within V1 <= V2
    for fixed in arrVolumes:
        if axis == 2:
            lstPoints = [(fixed, V2) for V2 in arrVolumes if V2 >= fixed]
        else:
            lstPoints = [(V1, fixed) for V1 in arrVolumes if V1 <= fixed]
        if len(lstPoints) < 2:
            continue
        lstValues = [function(V1, V2) for V1, V2 in lstPoints]
        scaled = margin * (1 + max(abs(v) for v in lstValues))
        passed, index = _strictlyMonotone(lstValues, scaled, sign)
        if not passed:
            return PropertyCheck(name, False, lstPoints[index])
    return PropertyCheck(name, True)
