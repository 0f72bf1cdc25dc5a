import csv
import json
import math

import jsonschema
import numpy as np
import pytest

from np_spectra import __version__
from np_spectra.reporting import (branch_rows, corner_curves, dumps, render_regions,
                                  report_document, write_branch_csv, write_geometry,
                                  write_json)
from np_spectra.schemas import (EigenBranch, Estimate, LambdaInterval, RegionKind, RegionSet,
                                SolverOptions, Space, SpectrumReport)
from np_spectra.spectra import cone_energy_spectrum
from np_spectra.spectral_curves import essential_radius

from .conftest import load_schema


def _energy_report(mu_plus=0.347, mu_minus=None):
    branch = EigenBranch(alpha=0.9, samples=[(0.0, mu_plus)], provenance={"agreement": {"0.0": 1e-4}})
    return SpectrumReport(
        space=Space.ENERGY,
        essential_core=RegionSet(kind=RegionKind.INTERVAL, intervals=[(-0.25, 0.25)]),
        threshold=0.25,
        mu_plus=Estimate(mu_plus, 1e-3) if mu_plus is not None else None,
        mu_minus=Estimate(mu_minus, 1e-3) if mu_minus is not None else None,
        branches=[branch] if mu_plus is not None else [],
        permittivity_intervals=[(float("-inf"), -1.0 / 3.0)]
    )


def _weighted_report(alpha=0.5):
    angles = [np.pi / 2] * 3
    radius = essential_radius(angles, alpha)
    return SpectrumReport(
        space=Space.WEIGHTED,
        alpha=alpha,
        essential_core=RegionSet(kind=RegionKind.CURVE_UNION, curves=corner_curves(angles, alpha)[:1],
                                 disk_radius=radius),
        threshold=radius
    )


# ============================================================================
# SCHEMAS
# ============================================================================

def test_region_set_rejects_overlap():
    with pytest.raises(ValueError):
        RegionSet(kind=RegionKind.INTERVAL, intervals=[(-0.3, 0.1), (0.0, 0.2)])


def test_region_set_sorts_intervals():
    region = RegionSet(kind=RegionKind.INTERVAL, intervals=[(0.3, 0.4), (-0.4, -0.3)])
    assert region.intervals == [(-0.4, -0.3), (0.3, 0.4)]


def test_outer_set_brackets_curve_regions():
    report = _weighted_report()
    outer = report.outer_set
    assert outer.kind == RegionKind.DISK_UNION
    assert outer.disk_radius == report.threshold
    assert report.to_dict()["outer_set"]["kind"] == "disk_union"
    assert _energy_report().outer_set is None
    assert _energy_report().to_dict()["outer_set"] is None


def test_lambda_interval_emptiness():
    assert LambdaInterval(0.2, 0.2, False, False).empty
    assert not LambdaInterval(0.2, 0.2, True, True).empty
    assert not LambdaInterval(0.2, 0.3, False, True).empty


def test_solver_options_overrides():
    options = SolverOptions.from_config(panels_per_arc=12, gauss_order=None)
    assert options.panels_per_arc == 12
    assert options.gauss_order == 10
    with pytest.raises(AttributeError):
        SolverOptions.from_config(unknown_knob=3)
    assert options.to_dict()["alpha_ladder"] == [0.8, 0.9]


# ============================================================================
# JSON AND CSV
# ============================================================================

def test_document_is_valid_json_without_infinities():
    document = report_document(_energy_report(), __version__, {"subcommand": "cone"})
    text = dumps(document)
    assert "Infinity" not in text
    assert json.loads(text)["permittivity_intervals"] == [[None, -1.0 / 3.0]]


def test_float_formatting_round_trips():
    document = report_document(_energy_report(mu_plus=0.1 + 0.2), __version__, {})
    assert json.loads(dumps(document))["mu_plus"]["value"] == 0.1 + 0.2


def test_report_matches_schema(octant, coarse_options):
    report = cone_energy_spectrum(octant, coarse_options)
    config = {"subcommand": "cone", "space": "energy", "alpha": None, "seed": 0,
              "options": coarse_options.to_dict()}
    document = json.loads(dumps(report_document(report, __version__, config)))
    jsonschema.validate(document, load_schema("report.schema.json"))


def test_weighted_report_matches_schema():
    config = {"subcommand": "cone", "space": "weighted", "alpha": 0.5, "seed": 0, "options": {}}
    document = json.loads(dumps(report_document(_weighted_report(), __version__, config)))
    jsonschema.validate(document, load_schema("report.schema.json"))


def test_write_json_is_deterministic(tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    write_json(report_document(_energy_report(), __version__, {}), str(first))
    write_json(report_document(_energy_report(), __version__, {}), str(second))
    assert first.read_bytes() == second.read_bytes()


def test_branch_csv(tmp_path):
    report = _energy_report()
    report.branches[0].samples.append((0.5, 0.33))
    path = tmp_path / "branches.csv"
    write_branch_csv(report, str(path))
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["vertex_id", "alpha", "xi", "lambda"]
    assert rows[1:] == [["cone", "0.9", "0.0", "0.347"], ["cone", "0.9", "0.5", "0.33"]]


def test_branch_rows_per_vertex():
    parent = _energy_report(mu_plus=None)
    parent.per_vertex = {"v0": _energy_report(), "v1": _energy_report()}
    assert [row[0] for row in branch_rows(parent)] == ["v0", "v1"]


# ============================================================================
# SVG
# ============================================================================

def test_weighted_svg_structure():
    report = _weighted_report()
    svg = render_regions(report, corner_curves([np.pi / 2] * 3, 0.5))
    for j in range(3):
        assert f'id="region-curve-{j}"' in svg
        assert f'id="region-reflection-{j}"' in svg
    assert svg.count('id="region-curve-') == 3
    assert svg.count('id="region-reflection-') == 3
    assert svg.count('id="disk-bracket"') == 1
    assert "interval-bar" not in svg
    assert "<script" not in svg


def test_energy_svg_structure():
    svg = render_regions(_energy_report(mu_plus=0.347, mu_minus=0.26))
    assert svg.count('id="interval-bar"') == 1
    assert 'id="eigen-tick-plus"' in svg
    assert 'id="eigen-tick-minus"' in svg
    assert "disk-bracket" not in svg
    assert "region-curve" not in svg


def test_empty_lambda_star_has_no_ticks():
    svg = render_regions(_energy_report(mu_plus=None))
    assert "eigen-tick" not in svg


def test_svg_is_deterministic():
    report = _weighted_report()
    assert render_regions(report) == render_regions(report)


def test_corner_curves_skip_flat_corners():
    curves = corner_curves([np.pi / 2, math.pi, 3 * np.pi / 2], 0.5)
    assert [c.beta for c in curves] == [np.pi / 2, 3 * np.pi / 2]


def test_write_geometry_returns_canonical_text(octant):
    text = write_geometry(octant.to_dict())
    assert text.endswith("\n")
    assert json.loads(text) == octant.to_dict()
    assert write_geometry(octant.to_dict()) == text
