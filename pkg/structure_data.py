import glob, json, logging, math, os
from enum import Enum

import pandas as pd

from densities import Coordinate, DensityModel, ExtendedReal
from errors import DensityFileError, ExpressionError
from expressions import parse
from parameters import getParams

logger = logging.getLogger(__name__)

DENSITY_KEYS = ("coordinate", "f", "L", "M")


def getCorpus(directory="data"):
    """
    Pull in every density definition under the data directory

    Returns:
        list: sorted list of .density file paths
    """
    return sorted(glob.glob(os.path.join(directory, "*.density")))


def readDensityFile(path, params=None):
    """
    Read a density definition: one `key = value` per line, `#` starts a comment.
    Keys: coordinate (position|volume), f (formula), and optional L and M overrides (number or inf)

    Args:
        path (str): file path
        params (dict): parameter dictionary to attach to the model

    Returns:
        DensityModel: the parsed, not yet validated, density
    """
    try:
        with open(path, mode='r', encoding='UTF-8') as density_file:
            lstLines = density_file.read().splitlines()
    except (OSError, UnicodeDecodeError) as error:
        raise DensityFileError("cannot read density file " + str(path) + ": " + str(error))

    dictEntries = {}
    for intLine, line in enumerate(lstLines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DensityFileError(str(path) + ":" + str(intLine) + ": expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in DENSITY_KEYS:
            raise DensityFileError(str(path) + ":" + str(intLine) + ": unknown key " + repr(key))
        if key in dictEntries:
            raise DensityFileError(str(path) + ":" + str(intLine) + ": duplicate key " + repr(key))
        dictEntries[key] = (intLine, value)

    for key in ("coordinate", "f"):
        if key not in dictEntries:
            raise DensityFileError(str(path) + ": missing required key " + repr(key))

    intLine, coordinate = dictEntries["coordinate"]
    try:
        coordinate = Coordinate(coordinate.lower())
    except ValueError:
        raise DensityFileError(str(path) + ":" + str(intLine) + ": coordinate must be position or volume")

    dictOverrides = {}
    for key in ("L", "M"):
        if key in dictEntries:
            intLine, value = dictEntries[key]
            try:
                dictOverrides[key] = ExtendedReal.parse(value)
            except (ValueError, ExpressionError):
                raise DensityFileError(str(path) + ":" + str(intLine) + ": " + key + " must be a number or inf")

    expr = parse(dictEntries["f"][1])
    name = os.path.splitext(os.path.basename(str(path)))[0]
    logger.info("Loaded density %s: f(%s) = %s", name, expr.variable, expr.text)
    return DensityModel(expr, coordinate, dictOverrides.get("L"), dictOverrides.get("M"),
                        params if params is not None else getParams(), name)


##### JSON #####

def jsonValue(value):
    """
    Plain JSON-ready value: infinities become the strings "inf" / "-inf", enums their value
    """
    if isinstance(value, ExtendedReal):
        value = float(value)
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {key: jsonValue(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonValue(item) for item in value]
    if hasattr(value, "item"):
        return jsonValue(value.item())
    return value


def dumpJson(report):
    # Floats print as the shortest repr that reads back to the same double, as lossless as %.17g
    return json.dumps(jsonValue(report), indent=2, allow_nan=False)


def validationSection(report):
    return {"passed": report.passed,
            "checks": [{"name": check.name, "passed": check.passed, "witness": check.witness,
                        "detail": check.detail} for check in report.checks]}


def limitSection(value, verdict, trace):
    return {"value": value, "verdict": verdict, "samples": len(trace)}


def analysisSection(analysis):
    return {"V1": analysis.V1, "V2": analysis.V2, "v_tilde": analysis.v_tilde, "P2": analysis.P2,
            "P3": analysis.P3, "mu": analysis.mu, "verdict": analysis.verdict}


def analysisReport(model, validation, profile=None, blowup=None, tieSamples=None, points=None, tieNote=""):
    """
    Full analysis report in documented key order: density, validation, L, M, regime, V0, lambda samples
    (with lambda_note when the ladder stopped early) and classified points
    """
    dictReport = {"density": {"name": model.name, "coordinate": model.coordinate, "f": model.expr.text},
                  "validation": validationSection(validation)}
    if profile is not None:
        dictReport["L"] = limitSection(profile.L, profile.L_verdict, profile.L_trace)
        dictReport["M"] = limitSection(profile.M, profile.M_verdict, profile.M_trace)
        dictReport["diagnostics"] = list(profile.diagnostics)
    if blowup is not None:
        dictReport["regime"] = blowup.regime
        dictReport["V0"] = {"value": blowup.V0, "bracket": list(blowup.bracket), "limit_at_zero": blowup.s0}
    if tieSamples is not None:
        dictReport["lambda"] = [{"V1": V1, "lambda": tie} for V1, tie in tieSamples]
        if tieNote:
            dictReport["lambda_note"] = tieNote
    if points is not None:
        dictReport["points"] = [analysisSection(analysis) for analysis in points]
    return dictReport


def oracleReport(result):
    configuration = result.configuration
    return {"pattern": list(result.pattern),
            "configuration": {"boundaries": configuration.boundaries, "labels": configuration.labels,
                              "topology": configuration.topology()},
            "perimeter": result.perimeter, "P2": result.P2, "P3": result.P3,
            "min_P2_P3": min(result.P2, result.P3), "agrees": result.agrees, "stagnated": result.stagnated,
            "level_history": result.history, "patterns_searched": result.patterns_searched}


def propertyReport(model, checks):
    return {"density": model.name, "passed": all(check.passed for check in checks),
            "checks": [{"name": check.name, "passed": check.passed, "witness": check.witness,
                        "detail": check.detail} for check in checks]}


##### CSV #####

def writeCsv(frame, path):
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.17g")


def writeTraceCsv(trace, path):
    writeCsv(pd.DataFrame(trace, columns=["k", "V", "value"]), path)


def writePhaseCsv(rows, path):
    frame = pd.DataFrame([(row.V1, row.V2, row.mu, row.P2, row.P3, row.verdict) for row in rows],
                         columns=["v1", "v2", "mu", "p2", "p3", "verdict"])
    writeCsv(frame.sort_values(["v1", "v2"], kind="stable"), path)


def writeTieCurveCsv(curve, path):
    writeCsv(pd.DataFrame(curve.samples, columns=["v1", "lambda", "mu_at_tie"]), path)


def readCsv(path):
    """
    Read back a CSV written by this module as a list of dictionaries
    """
    return pd.read_csv(path, float_precision="round_trip").to_dict("records")
