import csv
import json
import os

import jsonschema
import numpy as np
import pytest

from np_spectra.cli import RunConfig, build_parser, config_from_args, main, run
from np_spectra.errors import InvalidParams
from np_spectra.geometry import cone_from_dict, polyhedron_from_dict
from np_spectra.schemas import Space

from .conftest import DATA_DIR, load_schema

OCTANT = os.path.join(DATA_DIR, "octant.json")
CUBE = os.path.join(DATA_DIR, "cube.json")
TWOBRICK = os.path.join(DATA_DIR, "twobrick.json")


def _error(capsys):
    err = capsys.readouterr().err
    lines = [line for line in err.splitlines() if line.startswith('{"error"')]
    assert lines, err
    return json.loads(lines[-1])


# ============================================================================
# ARGUMENTS
# ============================================================================

def test_flags_override_config():
    args = build_parser().parse_args(["cone", OCTANT, "--space", "weighted", "--alpha", "0.5",
                                      "--panels", "12", "--order", "6", "--xi-steps", "9"])
    config = config_from_args(args)
    assert config.space == Space.WEIGHTED
    assert config.alpha == 0.5
    assert config.options.panels_per_arc == 12
    assert config.options.gauss_order == 6
    assert config.options.xi_steps == 9
    assert config.options.refined_panels_per_arc == 24


def test_config_echo_is_serializable():
    args = build_parser().parse_args(["curve", "--alpha", "0.5", "--beta", "1.0", "--seed", "3"])
    data = config_from_args(args).to_dict()
    assert json.loads(json.dumps(data))["seed"] == 3
    assert data["space"] == "energy"


def test_weighted_alpha_out_of_range(capsys):
    assert main(["cone", OCTANT, "--space", "weighted", "--alpha", "1.2"]) == 2
    assert _error(capsys)["error"] == "InvalidParams"


def test_run_validates_missing_input():
    with pytest.raises(InvalidParams):
        RunConfig(subcommand="cone").validate()
    assert run(RunConfig(subcommand="cone")) == 2


# ============================================================================
# SUBCOMMANDS
# ============================================================================

def test_curve_csv(tmp_path, capsys):
    path = tmp_path / "out.csv"
    assert main(["curve", "--alpha", "0.5", "--beta", "1.5707963", "--csv", str(path)]) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["sigma_max"] == pytest.approx(0.270598, abs=1e-6)
    with open(path) as fh:
        rows = list(csv.reader(fh))[1:]
    values = np.array([complex(float(r[1]), float(r[2])) for r in rows])
    assert np.max(np.abs(values)) == pytest.approx(0.270598, abs=1e-6)


def test_kernel(capsys):
    assert main(["kernel", "--a", "-1", "--kind", "m3"]) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["re"] == pytest.approx(np.pi / 8, rel=1e-8)
    assert document["im"] == 0.0
    assert document["singular_flag"] is False


def test_kernel_singular_point(capsys):
    assert main(["kernel", "--a", "1", "--kind", "m1"]) == 2
    assert _error(capsys)["error"] == "SingularPoint"


def test_twobrick_energy_exits_3(capsys):
    assert main(["polyhedron", "--space", "energy", TWOBRICK]) == 3
    error = _error(capsys)
    assert error["error"] == "NotLipschitz"
    assert error["exit_code"] == 3


def test_missing_file(tmp_path, capsys):
    assert main(["cone", str(tmp_path / "nope.json")]) == 2
    assert _error(capsys)["exit_code"] == 2


def test_degenerate_cone_file(tmp_path, capsys):
    path = tmp_path / "flat.json"
    path.write_text(json.dumps({"edges": [[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0]]}))
    assert main(["cone", str(path)]) == 2
    assert _error(capsys)["error"] == "DegenerateGeometry"


@pytest.mark.parametrize("path, loader", [(OCTANT, cone_from_dict), (CUBE, polyhedron_from_dict)])
def test_echo_geometry_round_trip(path, loader, capsys):
    subcommand = "cone" if loader is cone_from_dict else "polyhedron"
    assert main([subcommand, path, "--echo-geometry"]) == 0
    echoed = json.loads(capsys.readouterr().out)
    with open(path) as fh:
        original = loader(json.load(fh))
    again = loader(echoed)
    assert again.to_dict() == original.to_dict()
    jsonschema.validate(echoed, load_schema(f"{subcommand}.schema.json"))


@pytest.mark.slow
def test_octant_energy_report(tmp_path):
    report, svg = tmp_path / "octant.json", tmp_path / "octant.svg"
    argv = ["cone", "--space", "energy", OCTANT, "--json", str(report), "--svg", str(svg)]
    assert main(argv) == 0
    first = report.read_bytes()
    assert main(argv) == 0
    assert report.read_bytes() == first

    document = json.loads(first)
    jsonschema.validate(document, load_schema("report.schema.json"))
    assert document["version"]
    assert document["config"]["options"]["panels_per_arc"] == 16
    assert document["essential_core"]["intervals"][0] == pytest.approx([-0.25, 0.25], abs=1e-15)
    assert document["mu_plus"]["value"] == pytest.approx(0.347, abs=0.010)
    assert document["geometry"][0]["solid_angle"] == pytest.approx(np.pi / 2)
    assert 'id="interval-bar"' in svg.read_text()


def test_dump_matrices_flag(tmp_path, capsys):
    out = tmp_path / "dump"
    assert main(["cone", OCTANT, "--panels", "6", "--refined-panels", "8", "--order", "6",
                 "--dump-matrices", str(out), "--json", str(tmp_path / "r.json")]) in (0, 4)
    with open(out / "cone.json") as fh:
        sidecar = json.load(fh)
    assert sidecar["rows"] == 3 * 6 * 6
    assert os.path.getsize(out / "cone_B.bin") == 8 * sidecar["rows"] ** 2
