import logging
from dataclasses import dataclass, field
from enum import Enum

import mpmath

from densities import ExtendedReal, densityInVolume, densitySlopeInVolume
from errors import BubblelineError, InconclusiveLimitError, ModelViolationError
from expressions import evaluatePrecise

logger = logging.getLogger(__name__)


class Verdict(Enum):
    CONVERGED = "Converged"
    DECLARED_INFINITE = "DeclaredInfinite"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class LimitEstimate:
    """
    value is the last sample when the verdict is Inconclusive, so it is a lower bound only
    """
    value: ExtendedReal
    verdict: Verdict
    trace: list = field(default_factory=list)  # (k, V, value)
    note: str = ""


@dataclass
class AsymptoticProfile:
    L: ExtendedReal
    M: ExtendedReal
    L_verdict: Verdict
    M_verdict: Verdict
    L_trace: list = field(default_factory=list)
    M_trace: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    def require(self, name):
        """
        The value of L or M, raising when its verdict is Inconclusive
        """
        verdict = self.L_verdict if name == "L" else self.M_verdict
        if verdict == Verdict.INCONCLUSIVE:
            raise InconclusiveLimitError(name + " is inconclusive after sampling; supply " + name
                                         + " = <value|inf> in the density file")
        return self.L if name == "L" else self.M


def scanLimit(function, params, name="limit"):
    """
    Sample a nondecreasing sequence at V = 2^k and decide its limit

    Converged: successive samples differ by less than the convergence tolerance over the window.
    DeclaredInfinite: a sample passes the divergence threshold, or, from the divergence start on,
    the increments stay above tolerance and do not shrink (each at least the divergence ratio, just
    under 1, of the one before) over the divergence window, as in logarithmic growth.
    Anything slower is Inconclusive: a bounded sequence can creep upward for a long time.

    Args:
        function (callable): V -> sample value
        params (dict): parameter dictionary
        name (str): label for log messages

    Returns:
        LimitEstimate: verdict, value and trace
    """
    tolerance = params["Convergence Tolerance"]
    intWindow = params["Convergence Window"]
    threshold = params["Divergence Threshold"]
    ratio = params["Divergence Ratio"]
    intRatioWindow = params["Divergence Window"]
    intRatioStart = params["Divergence Start"]

    lstTrace = []
    intStill = 0
    intGrowing = 0
    previousIncrement = None

    for k in range(params["Limit Max Exponent"] + 1):
        V = 2.0 ** k
        try:
            value = float(function(V))
        except BubblelineError as error:
            logger.warning("%s sampling stopped at V = 2^%d: %s", name, k, error)
            break
        lstTrace.append((k, V, value))

        if value > threshold:
            return LimitEstimate(ExtendedReal.infinity(), Verdict.DECLARED_INFINITE, lstTrace,
                                 "sample exceeded " + repr(threshold) + " at V = 2^" + str(k))
        if len(lstTrace) < 2:
            continue

        increment = value - lstTrace[-2][2]
        bandwidth = tolerance * (1 + abs(value))

        intStill = intStill + 1 if abs(increment) < bandwidth else 0
        if intStill >= intWindow:
            return LimitEstimate(ExtendedReal(value), Verdict.CONVERGED, lstTrace)

        boolGrowing = (k >= intRatioStart and increment > bandwidth and previousIncrement is not None
                       and previousIncrement > 0 and increment >= ratio * previousIncrement)
        intGrowing = intGrowing + 1 if boolGrowing else 0
        if intGrowing >= intRatioWindow:
            return LimitEstimate(ExtendedReal.infinity(), Verdict.DECLARED_INFINITE, lstTrace,
                                 "increments failed to shrink from V = 2^" + str(k - intRatioWindow))
        previousIncrement = increment

    lastValue = lstTrace[-1][2] if lstTrace else 0.0
    logger.warning("%s inconclusive after %d samples, last value %r", name, len(lstTrace), lastValue)
    return LimitEstimate(ExtendedReal(lastValue), Verdict.INCONCLUSIVE, lstTrace,
                         "neither converged nor diverged by V = 2^" + str(params["Limit Max Exponent"]))


def doublingDefect(model, V):
    """
    g(V) = f(2V) - 2f(V). Volume-coordinate formulas are evaluated in mpmath to survive the cancellation
    """
    if model.is_positional:
        return densityInVolume(model, 2 * V) - 2 * densityInVolume(model, V)
    intDigits = model.params["Limit Precision"]
    with mpmath.workdps(intDigits):
        defect = evaluatePrecise(model.expr, 2 * V, intDigits) - 2 * evaluatePrecise(model.expr, V, intDigits)
        return float(defect)


def _override(value):
    verdict = Verdict.DECLARED_INFINITE if value.is_infinite() else Verdict.CONVERGED
    return LimitEstimate(value, verdict, [], "analytic override")


def estimateL(model):
    """
    L, the limit of f'(V) as V grows

    Args:
        model (DensityModel): validated density

    Returns:
        LimitEstimate: estimate of L
    """
    if model.analytic_L is not None:
        return _override(model.analytic_L)
    estimate = scanLimit(lambda V: densitySlopeInVolume(model, V), model.params, "L")
    if estimate.verdict == Verdict.CONVERGED and not estimate.value > 0:
        raise ModelViolationError("L = " + estimate.value.to_text() + " must be positive")
    return estimate


def estimateM(model):
    """
    M, the limit of g(V) = f(2V) - 2f(V) as V grows

    Args:
        model (DensityModel): validated density

    Returns:
        LimitEstimate: estimate of M
    """
    if model.analytic_M is not None:
        return _override(model.analytic_M)
    return scanLimit(lambda V: doublingDefect(model, V), model.params, "M")


def estimateProfile(model):
    """
    Estimate both limits and reconcile them: an infinite L forces an infinite M

    Args:
        model (DensityModel): validated density

    Returns:
        AsymptoticProfile: L, M, their verdicts, traces and diagnostics
    """
    estimateLimitL = estimateL(model)
    estimateLimitM = estimateM(model)
    lstDiagnostics = []

    if estimateLimitL.value.is_infinite():
        if estimateLimitM.verdict == Verdict.CONVERGED and estimateLimitM.value.is_finite():
            raise ModelViolationError("L = inf but M converged to " + estimateLimitM.value.to_text())
        if estimateLimitM.verdict != Verdict.DECLARED_INFINITE:
            lstDiagnostics.append("M = inf deduced from L = inf")
            estimateLimitM = LimitEstimate(ExtendedReal.infinity(), Verdict.DECLARED_INFINITE,
                                           estimateLimitM.trace, "deduced from L = inf")

    if estimateLimitM.verdict == Verdict.CONVERGED and estimateLimitM.value.is_finite():
        lstDiagnostics.append(_telescopingCheck(model, float(estimateLimitM.value)))

    for label, estimate in (("L", estimateLimitL), ("M", estimateLimitM)):
        if estimate.verdict == Verdict.DECLARED_INFINITE:
            logger.warning("%s declared infinite: %s", label, estimate.note)

    return AsymptoticProfile(estimateLimitL.value, estimateLimitM.value,
                             estimateLimitL.verdict, estimateLimitM.verdict,
                             estimateLimitL.trace, estimateLimitM.trace, lstDiagnostics)


def _telescopingCheck(model, M, intDoublings=20):
    # Summing g(2^k) <= M over k gives f(2^n)/2^n - f(1) <= (1 - 2^-n) M
    n = intDoublings
    lhs = densityInVolume(model, 2.0 ** n) / 2.0 ** n - densityInVolume(model, 1.0)
    rhs = (1 - 2.0 ** -n) * M
    tolerance = model.params["Convergence Tolerance"] * (1 + abs(rhs))
    verdict = "holds" if lhs <= rhs + tolerance else "FAILS"
    if verdict != "holds":
        logger.warning("Telescoping bound fails: %r > %r", lhs, rhs)
    return "telescoping bound f(2^" + str(n) + ")/2^" + str(n) + " - f(1) <= (1 - 2^-" + str(n) + ") M " + verdict


def traceIsMonotone(trace, tolerance=1e-9):
    """
    True when the sampled values never decrease by more than tolerance * (1 + |value|).
    Samples may repeat exactly once the sequence sits at the precision floor
    """
    lstValues = [value for _, _, value in trace]
    return all(b >= a - tolerance * (1 + abs(a)) for a, b in zip(lstValues, lstValues[1:]))
