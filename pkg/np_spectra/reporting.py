"""
NP Spectra - Report Output
Deterministic JSON and CSV writers and SVG region plots
"""

import csv
import io
import json
import logging
import math
from typing import Any, Dict, Iterable, List, Optional, Sequence

import matplotlib
from matplotlib.figure import Figure
from matplotlib.patches import Circle

from .schemas import RegionKind, SpectrumReport
from .spectral_curves import sample_curve

logger = logging.getLogger(__name__)

SVG_HASH_SALT = "np-spectra"


def _finite(value: Any) -> Any:
    """Replace non-finite floats by None so the document stays valid JSON"""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    return value


def report_document(report: SpectrumReport, version: str,
                    config: Dict[str, Any]) -> Dict[str, Any]:
    document = {"version": version, "config": config}
    document.update(report.to_dict())
    return _finite(document)


def dumps(document: Dict[str, Any]) -> str:
    # repr-based float output is the shortest string that round-trips
    return json.dumps(document, indent=2, allow_nan=False) + "\n"


def write_json(document: Dict[str, Any], path: str) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(document))
    logger.info(f"Report written to {path}")


def branch_rows(report: SpectrumReport) -> List[List[str]]:
    rows = []
    sources = report.per_vertex.items() if report.per_vertex else [("cone", report)]
    for vertex_id, sub in sources:
        for branch in sub.branches:
            for xi, lam in branch.samples:
                rows.append([vertex_id, repr(branch.alpha), repr(xi), repr(lam)])
    return rows


def write_branch_csv(report: SpectrumReport, path: str) -> None:
    """Columns vertex_id, alpha, xi, lambda; one row per branch sample"""
    rows = branch_rows(report)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["vertex_id", "alpha", "xi", "lambda"])
        writer.writerows(rows)
    logger.info(f"Wrote {len(rows)} branch samples to {path}")


# ============================================================================
# SVG
# ============================================================================

def render_regions(report: SpectrumReport, curves: Optional[Sequence] = None) -> str:
    """
    Static SVG of the spectrum in the complex lambda plane. Semantic artists
    carry gids: region-curve-<j>, region-reflection-<j>, disk-bracket,
    interval-bar, eigen-tick-plus, eigen-tick-minus.
    """
    if curves is None:
        curves = report.essential_core.curves
    fig = Figure(figsize=(6, 6))
    ax = fig.add_subplot(1, 1, 1)
    ax.set_xlabel("Re λ")
    ax.set_ylabel("Im λ")
    ax.set_aspect("equal")
    ax.axhline(0.0, color="0.8", linewidth=0.5)
    ax.axvline(0.0, color="0.8", linewidth=0.5)

    for j, curve in enumerate(curves):
        for reflected, gid, color in ((False, f"region-curve-{j}", "tab:blue"),
                                      (True, f"region-reflection-{j}", "tab:orange")):
            path = curve.closed(reflected)
            patch, = ax.fill(path.real, path.imag, facecolor=color, alpha=0.25,
                             edgecolor=color, linewidth=0.8)
            patch.set_gid(gid)

    extent = 0.3
    if report.essential_core.kind == RegionKind.INTERVAL:
        lo, hi = report.essential_core.intervals[0]
        bar, = ax.plot([lo, hi], [0.0, 0.0], color="tab:blue", linewidth=4,
                       solid_capstyle="butt")
        bar.set_gid("interval-bar")
        extent = max(extent, abs(lo), abs(hi))
    outer = report.outer_set
    if outer is not None:
        radius = outer.disk_radius
        ax.add_patch(Circle((0.0, 0.0), radius, fill=False, linestyle="--",
                            edgecolor="0.3", gid="disk-bracket"))
        extent = max(extent, radius)

    ticks = []
    if report.mu_plus is not None:
        ticks.append(("eigen-tick-plus", report.mu_plus.value))
    if report.mu_minus is not None:
        ticks.append(("eigen-tick-minus", -report.mu_minus.value))
    height = 0.03
    for gid, value in ticks:
        tick, = ax.plot([value, value], [-height, height], color="tab:red", linewidth=1.5)
        tick.set_gid(gid)
        extent = max(extent, abs(value))

    limit = min(0.5, 1.1 * extent)
    ax.set_xlim(-limit, limit)
    ax.set_ylim(-limit, limit)

    buffer = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "path"}):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def write_svg(report: SpectrumReport, path: str, curves: Optional[Sequence] = None) -> None:
    with open(path, "w") as fh:
        fh.write(render_regions(report, curves))
    logger.info(f"Figure written to {path}")


def write_geometry(data: Dict[str, Any]) -> str:
    """Canonical JSON text of a cone or polyhedron"""
    return json.dumps(data, indent=2) + "\n"


def corner_curves(angles: Iterable[float], alpha: float):
    """One curve per non-flat corner, for plotting"""
    return [sample_curve(alpha, float(beta)) for beta in angles if abs(beta - math.pi) > 1e-12]
