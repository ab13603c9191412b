import logging, math, os, sys

import click

from bubbles import Minimizer, Regime, blowupTime, classify
from densities import validate
from errors import (BubblelineError, InconclusiveLimitError, OracleStagnationError, ValidationFailedError)
from limits import estimateProfile
from oracle import bruteForceMinimize
from parameters import CONFIG_ENV, loadParams
from render import renderPhaseSvg, renderTieCurveSvg, writeSvg
from structure_data import (analysisReport, analysisSection, dumpJson, oracleReport, propertyReport,
                            readDensityFile, writePhaseCsv, writeTieCurveCsv, writeTraceCsv)
from sweeps import blowupLadder, doublingLadder, phaseDiagram, tieCurve, verifyProperties

logger = logging.getLogger("bubbleline")

USAGE_EXIT = 4


class BubblelineGroup(click.Group):
    """
    Maps library errors and click usage errors onto the documented exit codes:
    0 success, 1 failure, 2 validation failure, 3 inconclusive limits, 4 usage error
    """

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            result = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.UsageError as error:
            error.show()
            result = USAGE_EXIT
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            result = 1
        except click.ClickException as error:
            error.show()
            result = error.exit_code
        except BubblelineError as error:
            click.echo("error: " + str(error), err=True)
            result = error.exit_code

        intCode = result if isinstance(result, int) else 0
        if standalone_mode:
            sys.exit(intCode)
        return intCode


def _loadModel(ctx, densityFile):
    model = readDensityFile(densityFile, ctx.obj["params"])
    report = validate(model)
    if not report.passed:
        click.echo(dumpJson(analysisReport(model, report)))
        raise ValidationFailedError("density " + model.name + " failed validation: "
                                    + ", ".join(check.name for check in report.failures()), report)
    return model, report


def _parsePoint(text):
    try:
        strV1, strV2 = text.split(",")
        return float(strV1), float(strV2)
    except ValueError:
        raise click.BadParameter("expected V1,V2 but got " + repr(text), param_hint="--point")


@click.group(cls=BubblelineGroup)
@click.option("--config", "configPath", type=click.Path(dir_okay=False), envvar=CONFIG_ENV,
              help="JSON file of parameter overrides.")
@click.option("--verbose", "-v", is_flag=True, help="Log progress at INFO level.")
@click.pass_context
def cli(ctx, configPath, verbose):
    """Double-bubble phase diagrams for symmetric log-convex densities on the line."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    ctx.obj["params"] = loadParams(configPath)


@cli.command()
@click.argument("density_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--trace-dir", type=click.Path(file_okay=False), help="Write L_trace.csv and M_trace.csv here.")
@click.option("--point", "points", multiple=True, help="V1,V2 to classify; repeatable.")
@click.option("--samples", default=8, show_default=True, type=click.IntRange(0, 60),
              help="Number of lambda samples in the report.")
@click.pass_context
def analyze(ctx, density_file, trace_dir, points, samples):
    """Validate a density, estimate L and M, and locate the blowup time V0."""
    lstPoints = [_parsePoint(text) for text in points]
    model, validation = _loadModel(ctx, density_file)
    profile = estimateProfile(model)

    if trace_dir:
        os.makedirs(trace_dir, exist_ok=True)
        writeTraceCsv(profile.L_trace, os.path.join(trace_dir, "L_trace.csv"))
        writeTraceCsv(profile.M_trace, os.path.join(trace_dir, "M_trace.csv"))

    try:
        blowup = blowupTime(model, profile)
    except InconclusiveLimitError:
        click.echo(dumpJson(analysisReport(model, validation, profile)))
        raise

    lstTies = []
    tieNote = ""
    if samples and blowup.regime == Regime.FINITE_BLOWUP:
        lstTies = blowupLadder(model, profile, blowup, samples)
    elif samples and blowup.regime == Regime.NO_BLOWUP:
        lstTies, tieNote = doublingLadder(model, profile, blowup, samples)

    lstAnalyses = [classify(model, profile, V1, V2, blowup) for V1, V2 in lstPoints]
    click.echo(dumpJson(analysisReport(model, validation, profile, blowup, lstTies, lstAnalyses, tieNote)))


@cli.command(name="classify")
@click.argument("density_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--v1", type=float, required=True, help="Smaller volume.")
@click.option("--v2", type=float, required=True, help="Larger volume.")
@click.pass_context
def classifyCommand(ctx, density_file, v1, v2):
    """Decide between the double and the triple interval at (V1, V2)."""
    model, _ = _loadModel(ctx, density_file)
    analysis = classify(model, None, v1, v2)
    if analysis.verdict == Minimizer.TIE:
        # Only a tie needs the blowup time
        analysis = classify(model, estimateProfile(model), v1, v2)
    click.echo(dumpJson(analysisSection(analysis)))


@cli.command(name="tie-curve")
@click.argument("density_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--v1-min", type=float, default=None, help="Smallest V1 [default: V0/100, or 0.01].")
@click.option("--v1-max", type=float, default=None, help="Largest V1 [default: V0, or 4].")
@click.option("--samples", default=32, show_default=True, type=click.IntRange(2, None))
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV path, stdout when omitted.")
@click.option("--svg", type=click.Path(dir_okay=False), default=None, help="Also render the curve as SVG.")
@click.pass_context
def tieCurveCommand(ctx, density_file, v1_min, v1_max, samples, out, svg):
    """Sample the tie function lambda(V1) as CSV: v1,lambda,mu_at_tie."""
    model, _ = _loadModel(ctx, density_file)
    profile = estimateProfile(model)
    blowup = blowupTime(model, profile)
    V0 = float(blowup.V0)
    if v1_min is None:
        v1_min = V0 / 100 if math.isfinite(V0) and V0 > 0 else 0.01
    if v1_max is None:
        v1_max = V0 if math.isfinite(V0) and V0 > 0 else 4.0

    curve = tieCurve(model, profile, blowup, v1_min, v1_max, samples)
    writeTieCurveCsv(curve, out if out else sys.stdout)
    if svg:
        writeSvg(renderTieCurveSvg(curve, blowup, "tie curve of " + model.name), svg)


@cli.command()
@click.argument("density_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--v1-max", type=float, required=True)
@click.option("--v2-max", type=float, required=True)
@click.option("--grid", default=16, show_default=True, type=click.IntRange(2, None))
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV path, stdout when omitted.")
@click.option("--svg", type=click.Path(dir_okay=False), default=None, help="Also render the grid as SVG.")
@click.pass_context
def phase(ctx, density_file, v1_max, v2_max, grid, out, svg):
    """Classify a V1 x V2 grid (V1 <= V2) as CSV: v1,v2,mu,p2,p3,verdict."""
    model, _ = _loadModel(ctx, density_file)
    profile = estimateProfile(model)
    blowup = blowupTime(model, profile)
    lstRows = phaseDiagram(model, profile, blowup, v1_max, v2_max, grid)
    writePhaseCsv(lstRows, out if out else sys.stdout)

    if svg:
        curve = None
        if blowup.regime != Regime.ALWAYS_DOUBLE:
            curve = tieCurve(model, profile, blowup, v1_max / grid, v1_max, grid)
        writeSvg(renderPhaseSvg(lstRows, v1_max, v2_max, curve, blowup, "phase diagram of " + model.name), svg)


@cli.command()
@click.argument("density_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--v1", type=float, required=True)
@click.option("--v2", type=float, required=True)
@click.option("--max-intervals", type=click.IntRange(1, 3), default=None,
              help="Intervals per region, 1 to 3 [default: Oracle Max Intervals].")
@click.pass_context
def oracle(ctx, density_file, v1, v2, max_intervals):
    """Brute-force the best interval configuration and compare it with min(P2, P3)."""
    model, _ = _loadModel(ctx, density_file)
    result = bruteForceMinimize(model, v1, v2, max_intervals)
    click.echo(dumpJson(oracleReport(result)))
    if result.stagnated:
        raise OracleStagnationError("search stagnated before reaching its final step; best so far reported", result)


@cli.command()
@click.argument("density_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--grid", default=5, show_default=True, type=click.IntRange(2, None))
@click.pass_context
def verify(ctx, density_file, grid):
    """Run the numerical property suite against one density."""
    model, _ = _loadModel(ctx, density_file)
    profile = estimateProfile(model)
    blowup = blowupTime(model, profile)
    lstChecks = verifyProperties(model, profile, blowup, grid)
    click.echo(dumpJson(propertyReport(model, lstChecks)))
    if not all(check.passed for check in lstChecks):
        ctx.exit(1)


def main():
    cli(prog_name="bubbleline")


if __name__ == "__main__":
    main()
