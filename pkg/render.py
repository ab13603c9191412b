import logging, math, os

from jinja2 import Environment, FileSystemLoader, select_autoescape

logger = logging.getLogger(__name__)

TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "templates")
COLORS = {"Double": "#9ecae1", "Triple": "#fdae6b", "Tie": "#d9d9d9"}

WIDTH, HEIGHT = 640, 480
LEFT, RIGHT, TOP, BOTTOM = 50, 540, 40, 430

environment = Environment(loader=FileSystemLoader(TEMPLATE_DIR), autoescape=select_autoescape(["svg", "j2"]),
                          trim_blocks=True, lstrip_blocks=True)


def _scale(v1Max, v2Max):
    def toX(V1):
        return LEFT + (RIGHT - LEFT) * V1 / v1Max

    def toY(V2):
        return BOTTOM - (BOTTOM - TOP) * V2 / v2Max
    return toX, toY


def renderPhaseSvg(rows, v1Max, v2Max, curve=None, blowup=None, title="phase diagram"):
    """
    Fill the phase template: one cell per row coloured by verdict, the lambda polyline and V0

    Args:
        rows (list): PhaseRows
        v1Max (float): V1 extent of the plot
        v2Max (float): V2 extent of the plot
        curve (TieCurve): optional tie curve to overlay
        blowup (BlowupResult): optional, draws a finite V0 inside the plot
        title (str): heading

    Returns:
        str: SVG document
    """
    toX, toY = _scale(v1Max, v2Max)
    lstV1 = sorted({row.V1 for row in rows})
    lstV2 = sorted({row.V2 for row in rows})
    cellWidth = (RIGHT - LEFT) / max(len(lstV1), 1)
    cellHeight = (BOTTOM - TOP) / max(len(lstV2), 1)

    lstCells = [{"x": toX(row.V1) - cellWidth, "y": toY(row.V2), "w": cellWidth, "h": cellHeight,
                 "V1": row.V1, "V2": row.V2, "verdict": row.verdict} for row in rows]

    lstCurve = []
    if curve is not None:
        lstCurve = [(toX(V1), toY(tie)) for V1, tie, _ in curve.samples if V1 <= v1Max and tie <= v2Max]

    blowupX = None
    if blowup is not None and math.isfinite(float(blowup.V0)) and 0 < float(blowup.V0) <= v1Max:
        blowupX = toX(float(blowup.V0))

    template = environment.get_template("phase.svg.j2")
    return template.render(width=WIDTH, height=HEIGHT, left=LEFT, right=RIGHT, top=TOP, bottom=BOTTOM,
                           title=title, cells=lstCells, curve=lstCurve, colors=COLORS, blowup_x=blowupX,
                           v1_max=v1Max, v2_max=v2Max)


def renderTieCurveSvg(curve, blowup=None, title="tie curve"):
    """
    Tie curve alone, scaled to its samples
    """
    v1Max = max(V1 for V1, _, _ in curve.samples)
    if blowup is not None and math.isfinite(float(blowup.V0)):
        v1Max = max(v1Max, float(blowup.V0))
    v2Max = max(tie for _, tie, _ in curve.samples)
    return renderPhaseSvg([], v1Max, v2Max, curve, blowup, title)


def writeSvg(document, path):
    with open(path, mode='w', encoding='UTF-8') as svg_file:
        svg_file.write(document)
    logger.info("Wrote %s", path)
