"""
NP Spectra - Nystrom Discretization
===================================
Composite Gauss-Legendre discretization of H(i xi) and S(i xi) on graded
panels of a spherical polygon, filtered eigenvalues of H and the Calderon
residual H S - S H* as a consistency diagnostic.

Matrices are stored in the square-root-weight basis: for nodes with
quadrature weights w_m and corner weights q_m,

    A[m, k] = q_m^{-alpha/2} sqrt(w_m) H(omega_m, omega_k) sqrt(w_k) q_k^{alpha/2}
    B[m, k] = sqrt(w_m) S(omega_m, omega_k) sqrt(w_k)

A is similar to the column-weighted Nystrom matrix H(omega_m, omega_k) w_k.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate, linalg
from scipy.optimize import linear_sum_assignment

from .errors import InvalidParams, NoConvergence
from .geometry import SphericalPolygon
from .mellin_kernels import (SAME_FACE_TOL, FOUR_PI, m1_coincidence_constant,
                             mellin_table)
from .schemas import KernelKind, SolverOptions
from .spectral_curves import essential_radius

logger = logging.getLogger(__name__)

MIN_GAUSS_ORDER = 4
MAX_GAUSS_ORDER = 32


# ============================================================================
# MESH
# ============================================================================

@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Graded composite Gauss-Legendre mesh. Node arrays are flat over all arcs;
    panels lists (arc, start, end, first node, last node + 1).
    """
    polygon: SphericalPolygon
    arc: np.ndarray
    s: np.ndarray
    weights: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    q: np.ndarray
    panels: Tuple[Tuple[int, float, float, int, int], ...]
    panels_per_arc: int
    gauss_order: int
    grading_levels: int

    @property
    def size(self) -> int:
        return len(self.s)

    def to_dict(self) -> Dict[str, int]:
        return {
            "panels_per_arc": self.panels_per_arc,
            "gauss_order": self.gauss_order,
            "grading_levels": self.grading_levels,
            "nodes": self.size
        }


def _half_arc_edges(half: float, n: int, levels: int) -> List[float]:
    """n panels on [0, half], the first uniform one split geometrically toward 0"""
    graded = min(levels, n - 1)
    width = half / (n - graded)
    edges = [0.0]
    edges += [width / 2 ** i for i in range(graded, 0, -1)]
    edges += [width * k for k in range(1, n - graded + 1)]
    edges[-1] = half
    return edges


def panel_edges(length: float, panels: int, levels: int) -> np.ndarray:
    """Panel breakpoints on [0, length], graded toward both corners"""
    left = panels // 2
    right = panels - left
    half = length / 2.0
    if left == 0:
        return np.array([0.0, length])
    lower = _half_arc_edges(half, left, levels)
    upper = [length - e for e in reversed(_half_arc_edges(half, right, levels))]
    return np.array(lower + upper[1:])


def build_mesh(polygon: SphericalPolygon, panels_per_arc: int, gauss_order: int,
               grading_levels: int) -> Mesh:
    """
    Raises:
        InvalidParams: panels_per_arc < 2, gauss_order outside [4, 32] or
            negative grading_levels
    """
    if panels_per_arc < 2:
        raise InvalidParams(f"panels_per_arc must be at least 2, got {panels_per_arc}")
    if not MIN_GAUSS_ORDER <= gauss_order <= MAX_GAUSS_ORDER:
        raise InvalidParams(f"gauss_order must lie in [{MIN_GAUSS_ORDER}, {MAX_GAUSS_ORDER}], got {gauss_order}")
    if grading_levels < 0:
        raise InvalidParams(f"grading_levels must be non-negative, got {grading_levels}")

    ref_nodes, ref_weights = legendre.leggauss(gauss_order)
    arcs, s_all, w_all, panels = [], [], [], []
    offset = 0
    for j in range(polygon.J):
        edges = panel_edges(float(polygon.arc_lengths[j]), panels_per_arc, grading_levels)
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = (hi - lo) / 2.0
            s_all.append(lo + half * (ref_nodes + 1.0))
            w_all.append(half * ref_weights)
            arcs.append(np.full(gauss_order, j))
            panels.append((j, float(lo), float(hi), offset, offset + gauss_order))
            offset += gauss_order

    arc = np.concatenate(arcs)
    s = np.concatenate(s_all)
    points = np.empty((len(s), 3))
    normals = np.empty((len(s), 3))
    q = np.empty(len(s))
    for j in range(polygon.J):
        on_arc = arc == j
        points[on_arc] = polygon.points(j, s[on_arc])
        normals[on_arc] = polygon.normals[j]
        q[on_arc] = polygon.weight(j, s[on_arc])

    mesh = Mesh(
        polygon=polygon, arc=arc, s=s, weights=np.concatenate(w_all),
        points=points, normals=normals, q=q, panels=tuple(panels),
        panels_per_arc=panels_per_arc, gauss_order=gauss_order,
        grading_levels=grading_levels
    )
    logger.debug(f"Mesh: {polygon.J} arcs x {panels_per_arc} panels x {gauss_order} nodes = {mesh.size}")
    return mesh


# ============================================================================
# LOG-SINGULAR PANEL RULE
# ============================================================================

@lru_cache(maxsize=8)
def log_panel_weights(gauss_order: int) -> np.ndarray:
    """
    W[m, k] = int_{-1}^{1} log|x_m - x| L_k(x) dx for the Lagrange basis L_k
    on the Gauss-Legendre nodes x_k. Moments against Legendre polynomials use
    QUADPACK's algebraic-logarithmic weights on each side of x_m.
    """
    x, wq = legendre.leggauss(gauss_order)
    vander = legendre.legvander(x, gauss_order - 1)
    moments = np.empty((gauss_order, gauss_order))
    for m, xm in enumerate(x):
        for n in range(gauss_order):
            coeffs = np.zeros(n + 1)
            coeffs[n] = 1.0

            def poly(t, c=coeffs):
                return legendre.legval(t, c)

            left, _ = integrate.quad(poly, -1.0, xm, weight="alg-logb", wvar=(0.0, 0.0))
            right, _ = integrate.quad(poly, xm, 1.0, weight="alg-loga", wvar=(0.0, 0.0))
            moments[m, n] = left + right
    scale = (2.0 * np.arange(gauss_order) + 1.0) / 2.0
    weights = moments @ (scale[:, None] * vander.T) * wq[None, :]
    weights.setflags(write=False)
    return weights


# ============================================================================
# ASSEMBLY
# ============================================================================

@dataclass(frozen=True, eq=False)
class NystromSystem:
    mesh: Mesh
    xi: float
    alpha: float
    A: np.ndarray
    B: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def similarity(self) -> np.ndarray:
        """q^{alpha/2} at the nodes"""
        return self.mesh.q ** (self.alpha / 2.0)


def _single_layer_blocks(mesh: Mesh, S: np.ndarray, xi: float,
                         quad_tol: Optional[float] = None) -> None:
    """Overwrite same-panel entries of S with product-integration values"""
    log_weights = log_panel_weights(mesh.gauss_order)
    ref_weights = legendre.leggauss(mesh.gauss_order)[1]
    table = mellin_table(KernelKind.ONE_HALF, abs(float(xi)), tol=quad_tol)
    diag_smooth = 2.0 * np.log(2.0) + m1_coincidence_constant(complex(0.5, xi)).real
    for _, lo, hi, start, end in mesh.panels:
        half = (hi - lo) / 2.0
        s = mesh.s[start:end]
        w = mesh.weights[start:end]
        gap = np.abs(s[:, None] - s[None, :])
        off = gap > 0
        # smooth part of M_{1/2} after removing -2 log|s - s'|
        smooth = np.full(gap.shape, diag_smooth)
        smooth[off] = table(np.cos(gap[off])) + 2.0 * np.log(gap[off])
        singular = half * (-2.0 * np.log(half) * ref_weights[None, :] - 2.0 * log_weights)
        # S[start:end, start:end] holds the column-weighted rule divided back by w
        S[start:end, start:end] = (singular + smooth * w[None, :]) / (FOUR_PI * w[None, :])


def assemble(polygon: SphericalPolygon, mesh: Mesh, xi: float, alpha: float,
             quad_tol: Optional[float] = None) -> NystromSystem:
    """
    Assemble the similarity-transformed H(i xi) matrix and the Gram matrix
    of S(i xi). quad_tol is the relative tolerance of the kernel tables.
    """
    if not 0 <= alpha < 1:
        raise InvalidParams(f"alpha must lie in [0, 1), got {alpha}")
    xi = float(xi)
    points = mesh.points
    gram = np.clip(points @ points.T, -1.0, 1.0)
    normal_dot = points @ mesh.normals.T

    # double layer
    kernel_table = mellin_table(KernelKind.THREE_HALF, abs(xi), tol=quad_tol)
    live = np.abs(normal_dot) >= SAME_FACE_TOL
    H = np.zeros_like(gram)
    H[live] = -normal_dot[live] * kernel_table(gram[live]) / FOUR_PI

    root = np.sqrt(mesh.weights)
    sim = mesh.q ** (alpha / 2.0)
    A = (root / sim)[:, None] * H * (root * sim)[None, :]

    # single layer
    single_table = mellin_table(KernelKind.ONE_HALF, abs(xi), tol=quad_tol)
    off_diag = gram.copy()
    np.fill_diagonal(off_diag, 0.0)
    S = single_table(off_diag) / FOUR_PI
    _single_layer_blocks(mesh, S, xi, quad_tol)
    B = root[:, None] * S * root[None, :]
    B = (B + B.T) / 2.0

    A.setflags(write=False)
    B.setflags(write=False)
    logger.debug(f"Assembled N={mesh.size} system at xi={xi}, alpha={alpha}")
    return NystromSystem(
        mesh=mesh, xi=xi, alpha=float(alpha), A=A, B=B,
        metadata={"mesh": mesh.to_dict(), "table_nodes": kernel_table.nodes,
                  "quad_tol": kernel_table.tol}
    )


def system_for(polygon: SphericalPolygon, xi: float, alpha: float, panels_per_arc: int,
               options: SolverOptions) -> NystromSystem:
    mesh = build_mesh(polygon, panels_per_arc, options.gauss_order, options.grading_levels)
    return assemble(polygon, mesh, xi, alpha, quad_tol=options.quad_tol)


# ============================================================================
# EIGENVALUES
# ============================================================================

@dataclass
class EigenResult:
    xi: float
    alpha: float
    eigenvalues_raw: np.ndarray
    eigenvalues_filtered: List[float]
    refinement_agreement: List[float]
    threshold: float
    nodes: Tuple[int, int] = (0, 0)

    @property
    def top(self) -> Optional[float]:
        return max(self.eigenvalues_filtered) if self.eigenvalues_filtered else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "xi": self.xi,
            "alpha": self.alpha,
            "threshold": self.threshold,
            "eigenvalues": self.eigenvalues_filtered,
            "refinement_agreement": self.refinement_agreement,
            "nodes": list(self.nodes)
        }


def _filtered(eigenvalues: np.ndarray, cut: float, tau_im: float) -> np.ndarray:
    keep = (np.abs(eigenvalues.imag) < tau_im) & (np.abs(eigenvalues.real) < 0.5) \
        & (np.abs(eigenvalues) > cut)
    return np.sort(eigenvalues[keep].real)[::-1]


def _match(values: np.ndarray, candidates: np.ndarray, tau: float) -> Optional[np.ndarray]:
    """Pair every value with a distinct candidate within tau; None if impossible"""
    if len(values) == 0:
        return np.zeros(0)
    if len(candidates) < len(values):
        return None
    cost = np.abs(values[:, None] - candidates[None, :])
    rows, cols = linear_sum_assignment(cost)
    gaps = cost[rows, cols]
    if np.any(gaps > tau):
        return None
    agreement = np.empty(len(values))
    agreement[rows] = gaps
    return agreement


def _compare(coarse: np.ndarray, fine: np.ndarray, cut: float,
             options: SolverOptions) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """
    Filtered eigenvalues of the fine system that pair one-to-one with the coarse
    ones. Candidates for pairing are taken tau_match below the cut so values
    straddling it do not count as a mismatch.
    """
    tau = options.tau_match
    coarse_kept = _filtered(coarse, cut, options.tau_im)
    fine_kept = _filtered(fine, cut, options.tau_im)
    fine_pool = _filtered(fine, cut - tau, options.tau_im)
    coarse_pool = _filtered(coarse, cut - tau, options.tau_im)
    forward = _match(fine_kept, coarse_pool, tau)
    backward = _match(coarse_kept, fine_pool, tau)
    if forward is None or backward is None:
        return None
    return fine_kept, forward


def isolated_eigenvalues(system: NystromSystem, refined_system: NystromSystem,
                         threshold: Optional[float] = None,
                         options: Optional[SolverOptions] = None) -> EigenResult:
    """
    Real eigenvalues of A outside the essential radius (times 1 + margin),
    accepted when they agree between two resolutions.

    Raises:
        InvalidParams: the refined system is not finer or uses other (xi, alpha)
        NoConvergence: the two filtered sets still differ after one retry at
            higher resolution
    """
    options = options or SolverOptions()
    if refined_system.mesh.size <= system.mesh.size:
        raise InvalidParams("Refined system must have strictly more nodes")
    if (refined_system.xi, refined_system.alpha) != (system.xi, system.alpha):
        raise InvalidParams("Refined system must share xi and alpha")

    polygon = system.mesh.polygon
    if threshold is None:
        threshold = essential_radius(polygon.angles, system.alpha)
    cut = threshold * (1.0 + options.filter_margin)

    coarse = linalg.eigvals(system.A)
    fine = linalg.eigvals(refined_system.A)
    outcome = _compare(coarse, fine, cut, options)
    nodes = (system.mesh.size, refined_system.mesh.size)

    if outcome is None:
        step = max(refined_system.mesh.panels_per_arc - system.mesh.panels_per_arc, 4)
        panels = refined_system.mesh.panels_per_arc + step
        logger.warning(f"Filtered sets disagree at xi={system.xi}, alpha={system.alpha}; "
                       f"retrying with {panels} panels per arc")
        retry = build_mesh(polygon, panels, refined_system.mesh.gauss_order,
                           refined_system.mesh.grading_levels)
        retry_system = assemble(polygon, retry, system.xi, system.alpha,
                                quad_tol=options.quad_tol)
        coarse, fine = fine, linalg.eigvals(retry_system.A)
        outcome = _compare(coarse, fine, cut, options)
        nodes = (refined_system.mesh.size, retry.size)
        if outcome is None:
            raise NoConvergence(
                f"Isolated eigenvalues at xi={system.xi}, alpha={system.alpha} do not "
                f"stabilize under refinement ({nodes[0]} vs {nodes[1]} nodes)")

    kept, agreement = outcome
    logger.debug(f"xi={system.xi}: {len(kept)} isolated eigenvalue(s) above {cut:.6f}")
    return EigenResult(
        xi=system.xi,
        alpha=system.alpha,
        eigenvalues_raw=fine,
        eigenvalues_filtered=[float(v) for v in kept],
        refinement_agreement=[float(g) for g in agreement],
        threshold=float(threshold),
        nodes=nodes
    )


# ============================================================================
# DIAGNOSTICS
# ============================================================================

def calderon_residual(system: NystromSystem, B: Optional[np.ndarray] = None) -> float:
    """
    Relative Frobenius defect ||A B - B A^T|| / (||A|| ||B||) of the discrete
    identity H S = S H*, with A taken back to the square-root-weight basis.
    """
    sim = system.similarity
    A = sim[:, None] * system.A / sim[None, :]
    B = system.B if B is None else B
    defect = A @ B - B @ A.T
    return float(np.linalg.norm(defect) / (np.linalg.norm(A) * np.linalg.norm(B)))


def is_positive_definite(B: np.ndarray) -> bool:
    try:
        linalg.cholesky(B, lower=True)
    except linalg.LinAlgError:
        return False
    return True


def dump_matrices(system: NystromSystem, directory: str, prefix: str = "system") -> Dict[str, str]:
    """Write A (real, imaginary) and B as row-major float64 files plus a JSON sidecar"""
    os.makedirs(directory, exist_ok=True)
    A = np.asarray(system.A)
    files = {
        "A_real": np.ascontiguousarray(A.real, dtype="<f8"),
        "A_imag": np.ascontiguousarray(np.imag(A), dtype="<f8"),
        "B": np.ascontiguousarray(system.B, dtype="<f8")
    }
    paths = {}
    for name, matrix in files.items():
        path = os.path.join(directory, f"{prefix}_{name}.bin")
        matrix.tofile(path)
        paths[name] = path

    sidecar = {
        "rows": int(A.shape[0]),
        "cols": int(A.shape[1]),
        "dtype": "float64",
        "byte_order": "little",
        "order": "row-major",
        "xi": system.xi,
        "alpha": system.alpha,
        "mesh": system.mesh.to_dict(),
        "files": {name: os.path.basename(path) for name, path in paths.items()}
    }
    sidecar_path = os.path.join(directory, f"{prefix}.json")
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh, indent=2)
    paths["sidecar"] = sidecar_path
    logger.info(f"Dumped {A.shape[0]}x{A.shape[1]} matrices to {directory}")
    return paths
