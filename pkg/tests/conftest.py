import json
import os

import pytest

from np_spectra.geometry import cone_from_dict, polyhedron_from_dict
from np_spectra.schemas import SolverOptions

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA_DIR = os.path.join(ROOT, "data")
SCHEMA_DIR = os.path.join(ROOT, "schemas")


def load_data(name):
    with open(os.path.join(DATA_DIR, name)) as fh:
        return json.load(fh)


def load_schema(name):
    with open(os.path.join(SCHEMA_DIR, name)) as fh:
        return json.load(fh)


@pytest.fixture
def octant():
    return cone_from_dict(load_data("octant.json"))


@pytest.fixture
def pyramid():
    return cone_from_dict(load_data("pyramid.json"))


@pytest.fixture
def cube():
    return polyhedron_from_dict(load_data("cube.json"))


@pytest.fixture
def tetrahedron():
    return polyhedron_from_dict(load_data("tetrahedron.json"))


@pytest.fixture
def twobrick():
    return polyhedron_from_dict(load_data("twobrick.json"))


@pytest.fixture
def coarse_options():
    """Small meshes and a short sweep; enough for structure, not for accuracy"""
    return SolverOptions(
        panels_per_arc=10,
        refined_panels_per_arc=14,
        gauss_order=8,
        grading_levels=3,
        tau_match=1e-2,
        xi_max=2.0,
        xi_steps=8,
        threads=2
    )
