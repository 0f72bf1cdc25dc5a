import json
import os

import numpy as np
import pytest

from np_spectra.errors import InvalidParams
from np_spectra.geometry import cone_from_edges
from np_spectra.nystrom import (assemble, build_mesh, calderon_residual, dump_matrices,
                                is_positive_definite, isolated_eigenvalues, log_panel_weights,
                                panel_edges, system_for)
from np_spectra.spectra import eigen_at


# ============================================================================
# MESH
# ============================================================================

def test_panel_edges_graded_toward_corners():
    edges = panel_edges(np.pi / 2, 10, 3)
    assert len(edges) == 11
    assert edges[0] == 0.0
    assert edges[-1] == pytest.approx(np.pi / 2)
    assert np.all(np.diff(edges) > 0)
    np.testing.assert_allclose(edges, np.pi / 2 - edges[::-1], atol=1e-14)
    widths = np.diff(edges)
    # pi/8 panels, the one at the corner halved three times
    assert widths[0] == pytest.approx(np.pi / 64)
    assert widths[0] == pytest.approx(widths[-1])


def test_build_mesh_sizes(octant):
    mesh = build_mesh(octant.cross_section, 6, 5, 2)
    assert mesh.size == 3 * 6 * 5
    assert len(mesh.panels) == 18
    for j in range(3):
        assert mesh.weights[mesh.arc == j].sum() == pytest.approx(np.pi / 2, rel=1e-13)
    np.testing.assert_allclose(np.linalg.norm(mesh.points, axis=1), 1.0, atol=1e-14)
    assert np.all(mesh.q > 0)
    assert mesh.to_dict() == {"panels_per_arc": 6, "gauss_order": 5, "grading_levels": 2,
                              "nodes": 90}


@pytest.mark.parametrize("panels, order, levels", [(1, 8, 2), (8, 2, 2), (8, 40, 2), (8, 8, -1)])
def test_build_mesh_rejects_bad_parameters(octant, panels, order, levels):
    with pytest.raises(InvalidParams):
        build_mesh(octant.cross_section, panels, order, levels)


@pytest.mark.parametrize("order", [4, 8, 12])
def test_log_panel_weights_integrate_constants(order):
    weights = log_panel_weights(order)
    x = np.polynomial.legendre.leggauss(order)[0]
    exact = (1 + x) * np.log(1 + x) + (1 - x) * np.log(1 - x) - 2.0
    np.testing.assert_allclose(weights.sum(axis=1), exact, atol=1e-12)


def test_log_panel_weights_integrate_linear_functions():
    order = 8
    weights = log_panel_weights(order)
    x = np.polynomial.legendre.leggauss(order)[0]
    # int_{-1}^{1} log|x_m - t| t dt
    constant = (1 + x) * np.log(1 + x) + (1 - x) * np.log(1 - x) - 2.0
    exact = x * constant + (1 - x) ** 2 / 2 * np.log(1 - x) - (1 + x) ** 2 / 2 * np.log(1 + x) + x
    np.testing.assert_allclose(weights @ x, exact, atol=1e-12)


# ============================================================================
# ASSEMBLY
# ============================================================================

@pytest.fixture
def small_system(octant):
    mesh = build_mesh(octant.cross_section, 6, 6, 2)
    return assemble(octant.cross_section, mesh, 0.0, 0.5)


def test_assembled_shapes(small_system):
    n = small_system.mesh.size
    assert small_system.A.shape == (n, n)
    assert small_system.B.shape == (n, n)
    np.testing.assert_array_equal(small_system.B, small_system.B.T)
    assert not small_system.A.flags.writeable


def test_same_face_entries_vanish(small_system):
    mesh = small_system.mesh
    same = mesh.arc[:, None] == mesh.arc[None, :]
    assert np.all(small_system.A[same] == 0.0)
    assert np.all(small_system.A[~same] != 0.0)


def test_alpha_out_of_range(octant):
    mesh = build_mesh(octant.cross_section, 4, 4, 1)
    with pytest.raises(InvalidParams):
        assemble(octant.cross_section, mesh, 0.0, 1.0)


@pytest.mark.parametrize("xi", [0.0, 1.0, 5.0])
def test_gram_matrix_positive(octant, coarse_options, xi):
    for panels in (coarse_options.panels_per_arc, coarse_options.refined_panels_per_arc):
        system = system_for(octant.cross_section, xi, 0.9, panels, coarse_options)
        assert is_positive_definite(system.B)


def test_positive_definite_detects_indefinite():
    assert not is_positive_definite(np.diag([1.0, -1.0]))


# ============================================================================
# EIGENVALUES
# ============================================================================

def test_filtered_eigenvalues_are_real_and_bounded(octant, coarse_options):
    for xi in (0.0, 1.0):
        result = eigen_at(octant, xi, 0.9, coarse_options)
        cut = result.threshold * (1 + coarse_options.filter_margin)
        for value in result.eigenvalues_filtered:
            assert cut < abs(value) < 0.5
        assert len(result.refinement_agreement) == len(result.eigenvalues_filtered)
        assert all(gap <= coarse_options.tau_match for gap in result.refinement_agreement)


def test_octant_has_positive_eigenvalue_at_zero(octant, coarse_options):
    result = eigen_at(octant, 0.0, 0.9, coarse_options, threshold=0.25)
    assert result.top is not None
    assert 0.3 < result.top < 0.4


def test_sets_for_opposite_xi_agree(octant, coarse_options):
    plus = eigen_at(octant, 1.5, 0.9, coarse_options)
    minus = eigen_at(octant, -1.5, 0.9, coarse_options)
    np.testing.assert_allclose(plus.eigenvalues_filtered, minus.eigenvalues_filtered, atol=1e-12)


def test_alpha_only_moves_the_threshold(octant, coarse_options):
    low = eigen_at(octant, 0.0, 0.8, coarse_options, threshold=0.25)
    high = eigen_at(octant, 0.0, 0.9, coarse_options, threshold=0.25)
    np.testing.assert_allclose(low.eigenvalues_filtered, high.eigenvalues_filtered, atol=1e-8)


def _top_real_eigenvalue(system):
    values = np.linalg.eigvals(system.A)
    return max(v.real for v in values if abs(v.imag) < 1e-8)


@pytest.mark.slow
def test_refinement_gaps_shrink(octant, coarse_options):
    tops = [_top_real_eigenvalue(system_for(octant.cross_section, 0.0, 0.9, panels, coarse_options))
            for panels in (8, 16, 24)]
    assert all(0.3 < top < 0.4 for top in tops)
    assert abs(tops[2] - tops[1]) < abs(tops[1] - tops[0])


def test_equivalent_splittings_agree(octant, coarse_options):
    # the same cone with arc x -> y split at its midpoint by a flat corner
    split = cone_from_edges([[1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1]])
    assert split.angles[1] == pytest.approx(np.pi, abs=1e-12)
    plain = eigen_at(octant, 0.0, 0.9, coarse_options, threshold=0.25)
    halved = eigen_at(split, 0.0, 0.9, coarse_options, threshold=0.25)
    assert halved.top == pytest.approx(plain.top, abs=2e-2)


def test_assembly_uses_configured_tolerance(octant, coarse_options):
    coarse_options.quad_tol = 1e-9
    system = system_for(octant.cross_section, 0.0, 0.9, 4, coarse_options)
    assert system.metadata["quad_tol"] == 1e-9


def test_refined_system_must_be_finer(octant, coarse_options):
    system = system_for(octant.cross_section, 0.0, 0.9, 6, coarse_options)
    with pytest.raises(InvalidParams):
        isolated_eigenvalues(system, system, options=coarse_options)


def test_refined_system_must_share_parameters(octant, coarse_options):
    coarse = system_for(octant.cross_section, 0.0, 0.9, 6, coarse_options)
    fine = system_for(octant.cross_section, 0.0, 0.8, 8, coarse_options)
    with pytest.raises(InvalidParams):
        isolated_eigenvalues(coarse, fine, options=coarse_options)


# ============================================================================
# DIAGNOSTICS
# ============================================================================

@pytest.mark.slow
@pytest.mark.parametrize("xi", [0.0, 1.0, 5.0])
def test_calderon_residual_decreases(octant, xi):
    residuals = []
    for panels in (8, 16, 24):
        mesh = build_mesh(octant.cross_section, panels, 10, 4)
        residuals.append(calderon_residual(assemble(octant.cross_section, mesh, xi, 0.9)))
    assert residuals[0] > residuals[1] > residuals[2]
    assert residuals[2] < 1e-3


def test_calderon_residual_removes_similarity(octant):
    mesh = build_mesh(octant.cross_section, 6, 6, 2)
    low = calderon_residual(assemble(octant.cross_section, mesh, 1.0, 0.2))
    high = calderon_residual(assemble(octant.cross_section, mesh, 1.0, 0.9))
    assert low == pytest.approx(high, rel=1e-8)


def test_dump_matrices(tmp_path, small_system):
    paths = dump_matrices(small_system, str(tmp_path), prefix="octant")
    n = small_system.mesh.size
    A_real = np.fromfile(paths["A_real"], dtype="<f8").reshape(n, n)
    B = np.fromfile(paths["B"], dtype="<f8").reshape(n, n)
    np.testing.assert_array_equal(A_real, small_system.A.real)
    np.testing.assert_array_equal(B, small_system.B)
    with open(os.path.join(str(tmp_path), "octant.json")) as fh:
        sidecar = json.load(fh)
    assert sidecar["rows"] == n
    assert sidecar["order"] == "row-major"
    assert sidecar["files"]["B"] == "octant_B.bin"
