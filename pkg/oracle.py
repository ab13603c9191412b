"""
Brute-force search over two-region configurations made of finitely many intervals.

A pattern is the left-to-right order of the pieces (region labels 1 and 2). Every pair of neighbouring
pieces is separated by a gap of length >= 0, and a zero gap or a zero piece collapses, so one
pattern also covers every configuration obtained by merging its pieces. Piece lengths are volume
parameters; the last piece of each region takes the remaining volume, which keeps the volume
constraints exact. Each pattern is optimized by a best-improvement compass search whose step is
divided by the refinement factor at every level.
"""

import itertools, logging, time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from bubbles import perimeterDouble, perimeterTriple
from densities import densityArray
from equilibrium import checkVolumes
from errors import UsageError

logger = logging.getLogger(__name__)

EMPTY = 0


@dataclass
class IntervalConfiguration:
    boundaries: list
    labels: list  # one label per gap between consecutive boundaries: 0 empty, 1 or 2 a region

    def volumes(self):
        dictVolumes = {1: 0.0, 2: 0.0}
        for label, a, b in zip(self.labels, self.boundaries, self.boundaries[1:]):
            if label != EMPTY:
                dictVolumes[label] += b - a
        return dictVolumes[1], dictVolumes[2]

    def region_sequence(self):
        return [label for label in self.labels if label != EMPTY]

    def topology(self):
        """double, triple, or other, read off the labels with empty gaps kept"""
        lstLabels = list(self.labels)
        if lstLabels in ([1, 2], [2, 1]):
            return "double"
        if lstLabels == [2, 1, 2]:
            return "triple"
        return "other"


@dataclass
class OracleResult:
    configuration: IntervalConfiguration
    perimeter: float
    pattern: tuple
    P2: float
    P3: float
    agrees: bool
    stagnated: bool
    history: list = field(default_factory=list)  # best perimeter after each level, per winning pattern
    patterns_searched: int = 0


def enumeratePatterns(maxIntervals):
    """
    Region orders with 1..maxIntervals pieces of each region, one representative per mirror pair

    Args:
        maxIntervals (int): cap on the pieces per region

    Returns:
        list: list of tuples of region labels
    """
    lstPatterns = []
    setSeen = set()
    for a in range(1, maxIntervals + 1):
        for b in range(1, maxIntervals + 1):
            for positions in itertools.combinations(range(a + b), a):
                pattern = tuple(1 if i in positions else 2 for i in range(a + b))
                key = min(pattern, pattern[::-1])
                if key not in setSeen:
                    setSeen.add(key)
                    lstPatterns.append(key)
    return lstPatterns


def reflect(configuration):
    return IntervalConfiguration([-b for b in reversed(configuration.boundaries)],
                                 list(reversed(configuration.labels)))


def configurationPerimeter(model, configuration):
    """
    Sum of f over the boundary points that separate differently labelled gaps (outside is empty)
    """
    lstLabels = [EMPTY] + list(configuration.labels) + [EMPTY]
    lstPoints = [b for i, b in enumerate(configuration.boundaries) if lstLabels[i] != lstLabels[i + 1]]
    if not lstPoints:
        return 0.0
    return float(np.sum(densityArray(model, np.array(lstPoints))))


class PatternLayout:
    """
    Maps a parameter vector (region-1 lengths, region-2 lengths, gaps, offset) to segment lengths
    """

    def __init__(self, pattern, V1, V2):
        self.pattern = pattern
        self.V1 = V1
        self.V2 = V2
        n = len(pattern)
        self.pieces1 = [i for i, label in enumerate(pattern) if label == 1]
        self.pieces2 = [i for i, label in enumerate(pattern) if label == 2]
        self.segment_labels = []
        for i, label in enumerate(pattern):
            if i > 0:
                self.segment_labels.append(EMPTY)
            self.segment_labels.append(label)
        self.n_free1 = len(self.pieces1) - 1
        self.n_free2 = len(self.pieces2) - 1
        self.n_gaps = n - 1
        self.dims = self.n_free1 + self.n_free2 + self.n_gaps + 1

    def start(self):
        x = np.zeros(self.dims)
        x[:self.n_free1] = self.V1 / len(self.pieces1)
        x[self.n_free1:self.n_free1 + self.n_free2] = self.V2 / len(self.pieces2)
        x[-1] = -(self.V1 + self.V2) / 2
        return x

    def lengths(self, X):
        """Segment lengths for each row of X, plus a feasibility mask"""
        m = X.shape[0]
        arrLengths = np.zeros((m, len(self.segment_labels)))

        for pieces, free, offset, volume in ((self.pieces1, self.n_free1, 0, self.V1),
                                             (self.pieces2, self.n_free2, self.n_free1, self.V2)):
            arrFree = X[:, offset:offset + free]
            for j, piece in enumerate(pieces[:-1]):
                arrLengths[:, 2 * piece] = arrFree[:, j]
            arrLengths[:, 2 * pieces[-1]] = volume - arrFree.sum(axis=1)

        gapStart = self.n_free1 + self.n_free2
        for j in range(self.n_gaps):
            arrLengths[:, 2 * j + 1] = X[:, gapStart + j]

        slack = 1e-12 * (self.V1 + self.V2)
        feasible = np.all(arrLengths >= -slack, axis=1)
        return np.maximum(arrLengths, 0.0), feasible

    def perimeters(self, model, X):
        """
        Weighted perimeter of every row of X; infeasible rows get inf
        """
        X = np.atleast_2d(X)
        arrLengths, feasible = self.lengths(X)
        arrResult = np.full(X.shape[0], np.inf)
        if not np.any(feasible):
            return arrResult

        arrLengths = arrLengths[feasible]
        m, nSegments = arrLengths.shape
        arrPoints = X[feasible, -1][:, None] + np.concatenate([np.zeros((m, 1)), np.cumsum(arrLengths, axis=1)], axis=1)

        # Label of the first segment of positive length at or after each boundary
        arrLabels = np.array(self.segment_labels)
        arrNext = np.full((m, nSegments + 1), EMPTY)
        for j in range(nSegments - 1, -1, -1):
            arrNext[:, j] = np.where(arrLengths[:, j] > 0, arrLabels[j], arrNext[:, j + 1])

        # Coincident boundaries count once, at the first of the group
        arrCounted = np.zeros((m, nSegments + 1), dtype=bool)
        arrPrevious = np.full(m, EMPTY)
        for j in range(nSegments + 1):
            boolFirst = np.ones(m, dtype=bool) if j == 0 else arrLengths[:, j - 1] > 0
            arrCounted[:, j] = boolFirst & (arrPrevious != arrNext[:, j])
            if j < nSegments:
                arrPrevious = np.where(arrLengths[:, j] > 0, arrLabels[j], arrPrevious)

        arrValues = np.zeros_like(arrPoints)
        arrValues[arrCounted] = densityArray(model, arrPoints[arrCounted])
        arrResult[feasible] = arrValues.sum(axis=1)
        return arrResult

    def configuration(self, x):
        arrLengths, _ = self.lengths(np.atleast_2d(x))
        lstBoundaries = [float(x[-1])]
        lstLabels = []
        for label, length in zip(self.segment_labels, arrLengths[0]):
            if length <= 0:
                continue
            if lstLabels and lstLabels[-1] == label:
                lstBoundaries[-1] += length
            else:
                lstLabels.append(label)
                lstBoundaries.append(lstBoundaries[-1] + length)
        return IntervalConfiguration(lstBoundaries, lstLabels)


def compassSearch(model, layout, deadline, params):
    """
    Best-improvement compass search: evaluate all 2 * dims axis moves at once, take the best,
    and refine the step when no move improves

    Returns:
        tuple: (best point, best perimeter, per-level history, stagnated flag)
    """
    x = layout.start()
    best = layout.perimeters(model, x)[0]
    step = (layout.V1 + layout.V2) / 4
    arrDirections = np.vstack([np.eye(layout.dims), -np.eye(layout.dims)])
    lstHistory = []
    boolStagnated = False

    for _ in range(params["Oracle Levels"]):
        boolImproving = True
        for _ in range(params["Oracle Sweep Cap"]):
            arrCandidates = x + step * arrDirections
            arrValues = layout.perimeters(model, arrCandidates)
            i = int(np.argmin(arrValues))
            if not arrValues[i] < best:
                boolImproving = False
                break
            x, best = arrCandidates[i], arrValues[i]
            if time.monotonic() > deadline:
                break
        if boolImproving:
            boolStagnated = True
        lstHistory.append(float(best))
        if time.monotonic() > deadline:
            boolStagnated = True
            break
        step /= params["Oracle Refinement"]

    return x, float(best), lstHistory, boolStagnated


def bruteForceMinimize(model, V1, V2, maxIntervals=None):
    """
    Minimize weighted perimeter over all patterns with up to maxIntervals pieces per region

    Args:
        model (DensityModel): validated density
        V1 (float): smaller volume
        V2 (float): larger volume
        maxIntervals (int): pieces per region, 1 to 3; defaults to Oracle Max Intervals

    Returns:
        OracleResult: best configuration with its comparison against the double and triple intervals
    """
    checkVolumes(V1, V2)
    params = model.params
    if maxIntervals is None:
        maxIntervals = params["Oracle Max Intervals"]
    if not 1 <= maxIntervals <= 3:
        raise UsageError("max intervals per region must be 1, 2 or 3, got " + repr(maxIntervals))

    lstPatterns = enumeratePatterns(maxIntervals)
    startTime = time.monotonic()
    deadline = startTime + params["Oracle Time Budget"]
    logger.info("%d patterns to search at V1 = %r, V2 = %r", len(lstPatterns), V1, V2)

    def searchPattern(pattern):
        layout = PatternLayout(pattern, V1, V2)
        return (pattern, layout) + compassSearch(model, layout, deadline, params)

    lstResults = []
    with ThreadPoolExecutor(max_workers=params["Workers"]) as executor:
        for i, result in enumerate(executor.map(searchPattern, lstPatterns)):
            lstResults.append(result)
            if i % 10 == 0:
                logger.info("    %d / %d completed | %d seconds elapsed", i, len(lstPatterns),
                            round(time.monotonic() - startTime))

    pattern, layout, x, best, lstHistory, _ = min(lstResults, key=lambda result: result[3])
    boolStagnated = any(result[5] for result in lstResults)
    configuration = layout.configuration(x)

    P2 = perimeterDouble(model, V1, V2)
    P3 = perimeterTriple(model, V1, V2)
    reference = min(P2, P3)
    boolAgrees = abs(best - reference) <= 1e-6 * (1 + reference)
    if boolStagnated:
        logger.warning("Oracle search stagnated at V1 = %r, V2 = %r; best so far %r", V1, V2, best)

    return OracleResult(configuration, best, pattern, P2, P3, boolAgrees, boolStagnated, lstHistory,
                        len(lstPatterns))
