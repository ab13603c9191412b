import logging, math, threading
from dataclasses import dataclass, field
from enum import Enum
from functools import total_ordering

import numpy as np
from scipy import integrate, interpolate

from errors import (BubblelineError, ExpressionError, ExpressionOverflowError, IndeterminateFormError,
                    InverseConvergenceError, ModelViolationError, NonSmoothError, QuadratureError,
                    UnboundedInverseError)
from expressions import evalDual, evaluate, evaluateArray
from parameters import getParams

logger = logging.getLogger(__name__)

GAUSS_NODES, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(20)


@total_ordering
class ExtendedReal:
    """
    A finite real number or one of +inf / -inf. NaN is never a valid value
    """

    __slots__ = ("value",)

    def __init__(self, value):
        value = float(value)
        if math.isnan(value):
            raise IndeterminateFormError("NaN is not an extended real")
        self.value = value

    @classmethod
    def infinity(cls, sign=1):
        return cls(math.inf if sign > 0 else -math.inf)

    @classmethod
    def parse(cls, text):
        strText = str(text).strip().lower()
        if strText in ("inf", "+inf", "infinity", "+infinity"):
            return cls.infinity(1)
        if strText in ("-inf", "-infinity"):
            return cls.infinity(-1)
        return cls(float(strText))

    def is_finite(self):
        return math.isfinite(self.value)

    def is_infinite(self):
        return not math.isfinite(self.value)

    def __float__(self):
        return self.value

    def __eq__(self, other):
        if isinstance(other, ExtendedReal):
            return self.value == other.value
        if isinstance(other, (int, float)):
            return self.value == other
        return NotImplemented

    def __lt__(self, other):
        return self.value < float(other)

    def __hash__(self):
        return hash(self.value)

    def __neg__(self):
        return ExtendedReal(-self.value)

    def __add__(self, other):
        floatOther = float(other)
        if self.is_infinite() and math.isinf(floatOther) and (self.value > 0) != (floatOther > 0):
            raise IndeterminateFormError("inf - inf is indeterminate")
        return ExtendedReal(self.value + floatOther)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-ExtendedReal(other) if not isinstance(other, ExtendedReal) else -other)

    def __rsub__(self, other):
        return ExtendedReal(other) - self

    def __mul__(self, other):
        floatOther = float(other)
        if (self.is_infinite() and floatOther == 0) or (math.isinf(floatOther) and self.value == 0):
            raise IndeterminateFormError("0 * inf is indeterminate")
        return ExtendedReal(self.value * floatOther)

    __rmul__ = __mul__

    def __repr__(self):
        return "ExtendedReal(" + self.to_text() + ")"

    def to_text(self):
        if self.value == math.inf:
            return "inf"
        if self.value == -math.inf:
            return "-inf"
        return repr(self.value)


class Coordinate(Enum):
    POSITION = "position"
    VOLUME = "volume"


@dataclass
class CheckResult:
    name: str
    passed: bool
    witness: float = None
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    def add(self, name, passed, witness=None, detail=""):
        self.checks.append(CheckResult(name, passed, witness, detail))

    def failures(self):
        return [check for check in self.checks if not check.passed]


class VolumeTransform:
    """
    Table of nodes (x_i, V_i) with V = integral of f from 0 to x, built outward from x = 0 on demand.
    Only x >= 0 is stored; negative arguments use the oddness of the map
    """

    def __init__(self, model):
        self.model = model
        self.step = model.params["Transform Step"]
        self.cap = model.params["Position Cap"]
        self.tolerance = model.params["Quadrature Tolerance"]
        self._lock = threading.Lock()
        self._xs = [0.0]
        self._Vs = [0.0]
        self._table = None

    def _segment(self, a, b):
        expr = self.model.expr
        value, error = integrate.quad(lambda t: evaluate(expr, t), a, b,
                                      epsabs=0.0, epsrel=self.tolerance, limit=100)
        if error > self.tolerance * (1 + abs(value)):
            raise QuadratureError("quadrature of f over [" + repr(a) + ", " + repr(b) + "] failed", error)
        if not value > 0:
            raise ModelViolationError("f is not positive on [" + repr(a) + ", " + repr(b) + "]")
        return value

    def extend(self, volume=0.0, position=0.0):
        """
        Grow the table until it covers the given volume and position, then snapshot it

        Returns:
            tuple: (xs, Vs, pchip interpolant of x against V)
        """
        with self._lock:
            boolGrew = self._table is None
            while len(self._xs) < 2 or self._Vs[-1] < volume or self._xs[-1] < position:
                a = self._xs[-1]
                b = (len(self._xs)) * self.step
                if b > self.cap:
                    raise UnboundedInverseError("volume " + repr(volume) + " lies beyond the position cap "
                                                + repr(self.cap))
                try:
                    increment = self._segment(a, b)
                except ExpressionOverflowError:
                    raise UnboundedInverseError("f overflows at x = " + repr(b) + " before volume "
                                                + repr(volume) + " is reached")
                total = self._Vs[-1] + increment
                if not math.isfinite(total):
                    raise UnboundedInverseError("volume overflows at x = " + repr(b))
                self._xs.append(b)
                self._Vs.append(total)
                boolGrew = True

            if boolGrew:
                arrXs = np.array(self._xs)
                arrVs = np.array(self._Vs)
                self._table = (arrXs, arrVs, interpolate.PchipInterpolator(arrVs, arrXs))
                logger.debug("Volume table extended to x = %s, V = %s", arrXs[-1], arrVs[-1])
            return self._table

    def _partial(self, lo, x):
        # 20-point Gauss-Legendre integral of f over [lo, x], elementwise
        half = (x - lo) / 2
        arrPoints = lo[:, None] + half[:, None] * (GAUSS_NODES[None, :] + 1)
        arrValues = evaluateArray(self.model.expr, arrPoints)
        return half * (arrValues @ GAUSS_WEIGHTS)

    def volume_of(self, x):
        absX = abs(float(x))
        if absX == 0:
            return 0.0
        xs, Vs, _ = self.extend(position=absX)
        i = min(int(np.searchsorted(xs, absX, side="right")) - 1, len(xs) - 2)
        value, error = integrate.quad(lambda t: evaluate(self.model.expr, t), xs[i], absX,
                                      epsabs=0.0, epsrel=self.tolerance)
        if error > self.tolerance * (1 + abs(value)):
            raise QuadratureError("quadrature of f over [" + repr(xs[i]) + ", " + repr(absX) + "] failed", error)
        return math.copysign(Vs[i] + value, x)

    def positions_of(self, volumes):
        """
        Invert V(x) for an array of volumes by safeguarded Newton steps from the pchip guess

        Args:
            volumes (array): volume coordinates

        Returns:
            np.ndarray: positions with V(x) = volume
        """
        arrVolumes = np.asarray(volumes, dtype=float)
        arrTargets = np.abs(arrVolumes).ravel()
        if arrTargets.size == 0:
            return np.zeros_like(arrVolumes)

        xs, Vs, pchip = self.extend(volume=float(arrTargets.max()))
        idx = np.clip(np.searchsorted(Vs, arrTargets, side="right") - 1, 0, len(xs) - 2)
        lo = xs[idx].copy()
        hi = xs[idx + 1].copy()
        base = Vs[idx]
        x = np.clip(pchip(arrTargets), lo, hi)
        tolerance = self.model.params["Interpolation Tolerance"] * 1e-2

        for _ in range(self.model.params["Newton Max Iterations"]):
            partial = self._partial(xs[idx], x)
            residual = base + partial - arrTargets
            if np.all(np.abs(residual) <= tolerance * (1 + arrTargets)):
                break
            # Shrink the bracket, then take the Newton step, falling back to bisection outside it
            hi = np.where(residual > 0, x, hi)
            lo = np.where(residual < 0, x, lo)
            slope = evaluateArray(self.model.expr, x)
            step = x - residual / slope
            x = np.where((step > lo) & (step < hi), step, (lo + hi) / 2)
        else:
            raise InverseConvergenceError("inverse of V(x) did not converge in "
                                          + str(self.model.params["Newton Max Iterations"])
                                          + " Newton steps for volumes up to " + repr(float(arrTargets.max())))

        return (np.sign(arrVolumes).ravel() * x).reshape(arrVolumes.shape)


class DensityModel:
    """
    A symmetric density on the real line, written either in position x or in volume coordinate V.
    Immutable apart from the lazily built volume table of positional models
    """

    def __init__(self, expr, coordinate, analyticL=None, analyticM=None, params=None, name=None):
        self.expr = expr
        self.coordinate = Coordinate(coordinate)
        self.analytic_L = analyticL
        self.analytic_M = analyticM
        self.params = params if params is not None else getParams()
        self.name = name if name is not None else expr.text
        self.transform = VolumeTransform(self) if self.coordinate == Coordinate.POSITION else None

    def __repr__(self):
        return "DensityModel(" + repr(self.name) + ", " + self.coordinate.value + ")"

    @property
    def is_positional(self):
        return self.coordinate == Coordinate.POSITION


def _requirePositional(model):
    if not model.is_positional:
        raise ModelViolationError("density " + model.name + " is already written in volume coordinate")


def volumeOfPosition(model, x):
    """
    V(x), the integral of f from 0 to x

    Args:
        model (DensityModel): positional density
        x (float): position

    Returns:
        float: volume coordinate of x
    """
    _requirePositional(model)
    return model.transform.volume_of(x)


def positionOfVolume(model, V):
    """
    Inverse of volumeOfPosition

    Args:
        model (DensityModel): positional density
        V (float): volume coordinate

    Returns:
        float: position x with V(x) = V
    """
    _requirePositional(model)
    if V == 0:
        return 0.0
    return float(model.transform.positions_of(np.array([V]))[0])


def densityInVolume(model, V):
    if model.is_positional:
        return evaluate(model.expr, positionOfVolume(model, V))
    return evaluate(model.expr, V)


def densityArray(model, volumes):
    """
    Vectorized densityInVolume

    Args:
        model (DensityModel): density
        volumes (array): volume coordinates

    Returns:
        np.ndarray: f at each volume
    """
    arrVolumes = np.asarray(volumes, dtype=float)
    if model.is_positional:
        return evaluateArray(model.expr, model.transform.positions_of(arrVolumes))
    return evaluateArray(model.expr, arrVolumes)


def densitySlopeInVolume(model, V, side=None):
    """
    f'(V), the derivative of the density in volume coordinate. For positional formulas
    this is (log f)'(x) at x = x(V)

    Args:
        model (DensityModel): density
        V (float): volume coordinate
        side (int): +1 or -1 for a one-sided slope at a kink; None certifies that both sides agree

    Returns:
        float: slope at V
    """
    tolerance = model.params["Kink Tolerance"]
    if model.is_positional:
        dual = evalDual(model.expr, positionOfVolume(model, V), side=side, kinkTolerance=tolerance)
        return dual.tangent / dual.primal
    return evalDual(model.expr, V, side=side, kinkTolerance=tolerance).tangent


def validationGrid(params):
    intExponent = params["Validation Exponent"]
    unit = params["Volume Unit"]
    return [unit * 2.0 ** k for k in range(-intExponent, intExponent + 1)]


def validate(model):
    """
    Check the standing hypotheses on a geometric grid: positivity, symmetry, strict convexity
    in volume coordinate, zero slope at the origin, and C1 at every grid point

    Args:
        model (DensityModel): density to check

    Returns:
        ValidationReport: one CheckResult per hypothesis, with a witness on failure
    """
    report = ValidationReport()
    params = model.params
    lstGrid = validationGrid(params)

    # Grid points in the formula's own coordinate
    if model.is_positional:
        try:
            lstPoints = [positionOfVolume(model, t) for t in lstGrid]
        except BubblelineError as error:
            report.add("transform", False, None, str(error))
            return report
        report.add("transform", True)
    else:
        lstPoints = list(lstGrid)

    _checkPositivity(model, report, lstPoints)
    _checkSymmetry(model, report, lstPoints, params["Symmetry Tolerance"])
    _checkConvexity(model, report, lstGrid)
    _checkOrigin(model, report, params["Slope Origin Tolerance"])
    _checkSmoothness(model, report, lstPoints, params["Kink Tolerance"])

    if not report.passed:
        logger.warning("Density %s failed validation: %s", model.name,
                       ", ".join(check.name for check in report.failures()))
    return report


def _checkPositivity(model, report, lstPoints):
    for t in [0.0] + lstPoints + [-t for t in lstPoints]:
        try:
            value = evaluate(model.expr, t)
        except ExpressionError as error:
            report.add("positivity", False, t, str(error))
            return
        if not value > 0:
            report.add("positivity", False, t, "f = " + repr(value))
            return
    report.add("positivity", True)


def _checkSymmetry(model, report, lstPoints, tolerance):
    for t in lstPoints:
        try:
            right = evaluate(model.expr, t)
            left = evaluate(model.expr, -t)
        except ExpressionError as error:
            report.add("symmetry", False, t, str(error))
            return
        if abs(right - left) > tolerance * max(abs(right), abs(left)):
            report.add("symmetry", False, t, "f(t) = " + repr(right) + ", f(-t) = " + repr(left))
            return
    report.add("symmetry", True)


def _checkConvexity(model, report, lstGrid):
    # One-sided slopes so that a kink reads as a jump rather than an error.
    # Far out the slope of a bounded-slope density saturates in double precision, so
    # strict increase is demanded only within one volume unit of the origin
    band = model.params["Volume Unit"]
    lstVolumes = sorted([-t for t in lstGrid] + [0.0] + lstGrid)
    previous = None
    previousV = None
    for V in lstVolumes:
        try:
            slope = densitySlopeInVolume(model, V, side=1)
        except BubblelineError as error:
            report.add("strict_convexity", False, V, str(error))
            return
        if previous is not None:
            boolStrict = abs(V) <= band and abs(previousV) <= band
            if slope < previous or (boolStrict and not slope > previous):
                report.add("strict_convexity", False, V, "slope " + repr(slope) + " after " + repr(previous))
                return
        previous = slope
        previousV = V
    report.add("strict_convexity", True)


def _checkOrigin(model, report, tolerance):
    try:
        slope = densitySlopeInVolume(model, 0.0, side=1)
    except BubblelineError as error:
        report.add("slope_at_origin", False, 0.0, str(error))
        return
    report.add("slope_at_origin", abs(slope) <= tolerance, None if abs(slope) <= tolerance else 0.0,
               "" if abs(slope) <= tolerance else "f'(0) = " + repr(slope))


def _checkSmoothness(model, report, lstPoints, tolerance):
    for t in [0.0] + lstPoints + [-t for t in lstPoints]:
        try:
            evalDual(model.expr, t, kinkTolerance=tolerance)
        except NonSmoothError as error:
            report.add("c1", False, t, str(error))
            return
        except ExpressionError as error:
            report.add("c1", False, t, str(error))
            return
    report.add("c1", True)
