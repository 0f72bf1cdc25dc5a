"""
NP Spectra - Cone Geometry
==========================
Polyhedral cones, their spherical polygon cross-sections and bounded
polyhedra.

A cone is given by its edge directions v_1..v_J in cyclic order. The face
F_j spans v_j and v_{j+1}; its outward unit normal is

    n_j = (v_{j+1} x v_j) / |v_{j+1} x v_j|

so the edges run counter-clockwise when the cone is viewed from outside
along its axis. The cross-section gamma = Gamma n S^2 is a spherical polygon
whose arc gamma_j joins the corners E_j and E_{j+1}.
"""

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from utils.geodesic import great_circle_distance, is_within_cap
from .errors import DegenerateGeometry, InvalidMesh, OutOfRange, SelfIntersecting

logger = logging.getLogger(__name__)

GEOMETRY_TOL = 1e-10
UNIT_TOL = 1e-12
CONGRUENCE_DECIMALS = 9

# Lipschitz (radial graph) heuristic
LIPSCHITZ_AXIS_TOL = 1e-8
LIPSCHITZ_STEP_TOL = 1e-12
LIPSCHITZ_SAMPLES_PER_ARC = 64


def _normalize(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


# ============================================================================
# DOMAIN TYPES
# ============================================================================

@dataclass(frozen=True, eq=False)
class SphericalPolygon:
    """
    Closed geodesic polygon on S^2.

    Arc j runs from corners[j] to corners[j+1] (indices mod J) and is
    parametrized by arc length s as cos(s) E_j + sin(s) T_j, where
    tangents[j] = T_j is the unit tangent at E_j pointing along the arc.
    """
    corners: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    angles: np.ndarray
    arc_lengths: np.ndarray

    @property
    def J(self) -> int:
        return len(self.corners)

    @cached_property
    def weight(self) -> "WeightFunction":
        """Default corner weight, cutoff one third of the shortest arc"""
        return WeightFunction(self, float(np.min(self.arc_lengths)) / 3.0)

    def arcs(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        return [(self.corners[j], self.corners[(j + 1) % self.J]) for j in range(self.J)]

    def points(self, j: int, s: np.ndarray) -> np.ndarray:
        """Vectorized arc parametrization (no range checks)"""
        s = np.asarray(s, dtype=float)[..., None]
        return np.cos(s) * self.corners[j] + np.sin(s) * self.tangents[j]


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """
    Corner weight q on gamma: q(omega(s)) = min(s, l_j - s, cutoff) on arc j.
    Equals the arc distance to the nearest corner within cutoff of a corner.
    """
    polygon: SphericalPolygon
    cutoff: float

    def __post_init__(self):
        if not self.cutoff > 0:
            raise ValueError(f"Weight cutoff must be positive, got {self.cutoff}")

    def __call__(self, j: int, s):
        length = self.polygon.arc_lengths[j]
        s = np.asarray(s, dtype=float)
        return np.minimum(np.minimum(s, length - s), self.cutoff)


@dataclass(frozen=True, eq=False)
class PolyhedralCone:
    edges: np.ndarray
    face_normals: np.ndarray
    cross_section: SphericalPolygon
    convex: bool
    lipschitz: bool
    # Corners inserted to split half-plane or reflex face sectors (beta = pi)
    virtual_corners: Tuple[int, ...] = ()

    @property
    def angles(self) -> np.ndarray:
        return self.cross_section.angles

    def to_dict(self) -> Dict[str, Any]:
        return {"edges": self.edges.tolist()}


@dataclass(frozen=True, eq=False)
class Polyhedron:
    vertices: np.ndarray
    faces: Tuple[Tuple[int, ...], ...]

    @cached_property
    def tangent_cones(self) -> Tuple[PolyhedralCone, ...]:
        return tuple(_build_tangent_cones(self))

    @property
    def lipschitz(self) -> bool:
        return all(cone.lipschitz for cone in self.tangent_cones)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "vertices": self.vertices.tolist(),
            "faces": [list(face) for face in self.faces]
        }


# ============================================================================
# CONES
# ============================================================================

def _corner_angles(corners: np.ndarray, tangents: np.ndarray) -> np.ndarray:
    """
    Interior angle at each corner between the outgoing arc tangent and the
    tangent back toward the previous corner, measured through the interior.
    """
    prev = np.roll(corners, 1, axis=0)
    back = prev - np.sum(prev * corners, axis=1, keepdims=True) * corners
    back = _normalize(back)
    sin_part = np.sum(np.cross(tangents, back) * corners, axis=1)
    cos_part = np.sum(tangents * back, axis=1)
    return np.mod(np.arctan2(sin_part, cos_part), 2 * np.pi)


def _on_arc(x, p1, p2, normal, tol=UNIT_TOL) -> bool:
    return (np.dot(np.cross(p1, x), normal) >= -tol
            and np.dot(np.cross(x, p2), normal) >= -tol)


def arcs_intersect(p1, p2, q1, q2) -> bool:
    """Test two minor great-circle arcs for a common point"""
    na = np.cross(p1, p2)
    nb = np.cross(q1, q2)
    line = np.cross(na, nb)
    if np.linalg.norm(line) < GEOMETRY_TOL:
        # same great circle: overlap iff an endpoint lies on the other arc
        return any(_on_arc(x, p1, p2, na) for x in (q1, q2)) or \
            any(_on_arc(x, q1, q2, nb) for x in (p1, p2))
    line = line / np.linalg.norm(line)
    for x in (line, -line):
        if _on_arc(x, p1, p2, na) and _on_arc(x, q1, q2, nb):
            return True
    return False


def _is_simple(polygon: SphericalPolygon) -> bool:
    arcs = polygon.arcs()
    J = len(arcs)
    for i, k in combinations(range(J), 2):
        if (k - i) % J in (1, J - 1):
            continue
        if arcs_intersect(*arcs[i], *arcs[k]):
            logger.debug(f"Arcs {i} and {k} intersect")
            return False
    return True


def cone_from_edges(edges: Sequence[Sequence[float]],
                    virtual_corners: Sequence[int] = ()) -> PolyhedralCone:
    """
    Build a polyhedral cone from its cyclically ordered edge directions.

    Raises:
        DegenerateGeometry: fewer than 3 edges, zero or (anti)parallel
            consecutive edges, folded or entirely flat cross-section
        SelfIntersecting: the cross-section polygon is not simple
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 2 or edges.shape[1] != 3:
        raise DegenerateGeometry(f"Edges must be a list of 3-vectors, got shape {edges.shape}")
    if len(edges) < 3:
        raise DegenerateGeometry(f"A cone needs at least 3 edges, got {len(edges)}")
    norms = np.linalg.norm(edges, axis=1)
    if np.any(norms < GEOMETRY_TOL):
        raise DegenerateGeometry("Edge direction of zero length")
    corners = edges / norms[:, None]

    following = np.roll(corners, -1, axis=0)
    face_cross = np.cross(following, corners)
    cross_norms = np.linalg.norm(face_cross, axis=1)
    if np.any(cross_norms < GEOMETRY_TOL):
        j = int(np.argmin(cross_norms))
        raise DegenerateGeometry(f"Edges {j} and {(j + 1) % len(corners)} are parallel or antiparallel")
    normals = face_cross / cross_norms[:, None]

    dots = np.sum(corners * following, axis=1)
    tangents = _normalize(following - dots[:, None] * corners)
    arc_lengths = np.arctan2(cross_norms, dots)
    angles = _corner_angles(corners, tangents)

    if np.any(angles < GEOMETRY_TOL) or np.any(angles > 2 * np.pi - GEOMETRY_TOL):
        raise DegenerateGeometry("Cross-section folds back on itself (corner angle 0 or 2*pi)")
    if np.all(np.abs(angles - np.pi) < GEOMETRY_TOL):
        raise DegenerateGeometry("All corner angles equal pi: the cone is a half-space")

    polygon = SphericalPolygon(
        corners=_frozen(corners),
        tangents=_frozen(tangents),
        normals=_frozen(normals),
        angles=_frozen(angles),
        arc_lengths=_frozen(arc_lengths)
    )
    if not _is_simple(polygon):
        raise SelfIntersecting("Cross-section polygon is not a simple closed curve")

    edge_side = corners @ normals.T
    convex = bool(np.all(edge_side <= GEOMETRY_TOL) and np.all(angles <= np.pi + GEOMETRY_TOL))

    cone = PolyhedralCone(
        edges=_frozen(corners),
        face_normals=polygon.normals,
        cross_section=polygon,
        convex=convex,
        lipschitz=True,
        virtual_corners=tuple(int(j) for j in virtual_corners)
    )
    return replace(cone, lipschitz=is_lipschitz(cone))


def cone_from_dict(data: Dict[str, Any]) -> PolyhedralCone:
    if "edges" not in data:
        raise DegenerateGeometry("Cone JSON must contain an 'edges' list")
    return cone_from_edges(data["edges"])


# ============================================================================
# ARC PARAMETRIZATION
# ============================================================================

def arc_point(polygon: SphericalPolygon, j: int, s: float,
              weight: Optional[WeightFunction] = None) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Point at arc distance s from E_j along arc j, the outward normal of the
    face containing that arc, and the weight q at the point.
    """
    if not 0 <= j < polygon.J:
        raise OutOfRange(f"Arc index {j} outside 0..{polygon.J - 1}")
    length = float(polygon.arc_lengths[j])
    if s < -UNIT_TOL or s > length + UNIT_TOL:
        raise OutOfRange(f"Arc length {s} outside [0, {length}] on arc {j}")
    s = min(max(float(s), 0.0), length)
    weight = weight or polygon.weight
    omega = polygon.points(j, s)
    return omega, polygon.normals[j].copy(), float(weight(j, s))


# ============================================================================
# LIPSCHITZ HEURISTIC
# ============================================================================

def _lattice_directions() -> np.ndarray:
    grid = np.array([(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)
                     if (i, j, k) != (0, 0, 0)], dtype=float)
    return _normalize(grid)


def _polygon_samples(polygon: SphericalPolygon, per_arc: int) -> np.ndarray:
    samples = []
    for j in range(polygon.J):
        s = np.linspace(0.0, polygon.arc_lengths[j], per_arc, endpoint=False)
        samples.append(polygon.points(j, s))
    return np.vstack(samples)


def _is_radial_graph(samples: np.ndarray, normals: np.ndarray, axis: np.ndarray) -> bool:
    """
    The closed sample loop is a radial graph over axis: no face plane
    contains the axis and the azimuth about the axis advances strictly
    monotonically through one full turn.
    """
    if np.any(np.abs(normals @ axis) < LIPSCHITZ_AXIS_TOL):
        return False
    if any(is_within_cap(p, axis, 1e-9) or is_within_cap(p, -axis, 1e-9) for p in samples):
        return False

    helper = np.eye(3)[np.argmin(np.abs(axis))]
    e1 = _normalize(np.cross(axis, helper))
    e2 = np.cross(axis, e1)
    azimuth = np.arctan2(samples @ e2, samples @ e1)
    steps = np.diff(np.append(azimuth, azimuth[0]))
    steps = (steps + np.pi) % (2 * np.pi) - np.pi
    if not (np.all(steps > LIPSCHITZ_STEP_TOL) or np.all(steps < -LIPSCHITZ_STEP_TOL)):
        return False
    return abs(abs(np.sum(steps)) - 2 * np.pi) < 1e-6


def is_lipschitz(cone: PolyhedralCone) -> bool:
    """
    Radial graph test: True if some candidate axis u, lying in no face
    plane, sees the cross-section with strictly monotone azimuth, so every
    great semicircle from u to -u crosses it exactly once.

    Convex cones short-circuit to True. Otherwise the candidates are the
    normalized edge sum, the negated face-normal sum and the 26 lattice
    directions; the verdict is a sampling heuristic.
    """
    if cone.convex:
        return True

    candidates = []
    for vector in (cone.edges.sum(axis=0), -cone.face_normals.sum(axis=0)):
        if np.linalg.norm(vector) > GEOMETRY_TOL:
            candidates.append(vector / np.linalg.norm(vector))
    candidates.extend(_lattice_directions())

    samples = _polygon_samples(cone.cross_section, LIPSCHITZ_SAMPLES_PER_ARC)
    for axis in candidates:
        if _is_radial_graph(samples, cone.face_normals, axis):
            logger.debug(f"Radial graph axis found: {np.round(axis, 4).tolist()}")
            return True
    logger.warning("No radial graph axis found among candidates; cone treated as non-Lipschitz")
    return False


# ============================================================================
# DERIVED QUANTITIES
# ============================================================================

def solid_angle(cone: PolyhedralCone) -> float:
    """Area of the cross-section region (Gauss-Bonnet for geodesic polygons)"""
    J = cone.cross_section.J
    return float(np.sum(cone.angles) - (J - 2) * np.pi)


def congruence_key(cone: PolyhedralCone) -> Tuple:
    """
    Key shared by congruent cones: sorted angle multiset plus sorted
    pairwise corner geodesic distances, quantized at 1e-9.
    """
    corners = cone.cross_section.corners
    distances = [great_circle_distance(corners[i], corners[k])
                 for i, k in combinations(range(len(corners)), 2)]
    angles = np.round(np.sort(cone.angles), CONGRUENCE_DECIMALS) + 0.0
    distances = np.round(np.sort(distances), CONGRUENCE_DECIMALS) + 0.0
    return (len(corners), tuple(angles.tolist()), tuple(distances.tolist()))


# ============================================================================
# POLYHEDRA
# ============================================================================

def _newell_normal(points: np.ndarray) -> np.ndarray:
    following = np.roll(points, -1, axis=0)
    return np.sum(np.cross(points, following), axis=0)


def _validate_polyhedron(vertices: np.ndarray, faces: Sequence[Sequence[int]]):
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise InvalidMesh(f"Vertices must be a list of 3-vectors, got shape {vertices.shape}")
    directed = {}
    used = set()
    for f, face in enumerate(faces):
        if len(face) < 3:
            raise InvalidMesh(f"Face {f} has fewer than 3 vertices")
        if len(set(face)) != len(face):
            raise InvalidMesh(f"Face {f} repeats a vertex")
        for index in face:
            if not 0 <= index < len(vertices):
                raise InvalidMesh(f"Face {f} references missing vertex {index}")
        if np.linalg.norm(_newell_normal(vertices[list(face)])) < GEOMETRY_TOL:
            raise InvalidMesh(f"Face {f} has zero area")
        for a, b in zip(face, list(face[1:]) + [face[0]]):
            if (a, b) in directed:
                raise InvalidMesh(f"Directed edge {a}->{b} used by faces {directed[(a, b)]} and {f}; "
                                  "orientation is inconsistent")
            directed[(a, b)] = f
            used.add(a)
    for (a, b), f in directed.items():
        if (b, a) not in directed:
            raise InvalidMesh(f"Edge {a}-{b} of face {f} is not shared by a second face; surface is open")
    unused = set(range(len(vertices))) - used
    if unused:
        raise InvalidMesh(f"Vertices {sorted(unused)} belong to no face")


def polyhedron_from_dict(data: Dict[str, Any]) -> Polyhedron:
    """Parse and validate Polyhedron JSON (faces counter-clockwise seen from outside)"""
    if "vertices" not in data or "faces" not in data:
        raise InvalidMesh("Polyhedron JSON must contain 'vertices' and 'faces'")
    vertices = np.asarray(data["vertices"], dtype=float)
    faces = tuple(tuple(int(i) for i in face) for face in data["faces"])
    _validate_polyhedron(vertices, faces)
    return Polyhedron(vertices=_frozen(vertices), faces=faces)


def _split_sector(d_prev: np.ndarray, d_next: np.ndarray, normal: np.ndarray) -> List[np.ndarray]:
    """
    Directions strictly inside a face sector, rotating d_prev toward d_next
    about the outward normal, so that every piece is shorter than pi.
    """
    angle = np.mod(np.arctan2(np.dot(np.cross(d_next, d_prev), normal), np.dot(d_next, d_prev)),
                   2 * np.pi)
    if angle < np.pi - 1e-9:
        return []
    pieces = int(np.floor(angle / (np.pi - 1e-6))) + 1
    ortho = np.cross(normal, d_prev)
    return [np.cos(phi) * d_prev - np.sin(phi) * ortho
            for phi in angle * np.arange(1, pieces) / pieces]


def _build_tangent_cones(poly: Polyhedron) -> List[PolyhedralCone]:
    sectors: Dict[int, Dict[int, Tuple[int, np.ndarray]]] = {}
    for face in poly.faces:
        normal = _newell_normal(poly.vertices[list(face)])
        normal = normal / np.linalg.norm(normal)
        n = len(face)
        for position, vertex in enumerate(face):
            prev_vertex = face[position - 1]
            next_vertex = face[(position + 1) % n]
            fan = sectors.setdefault(vertex, {})
            if prev_vertex in fan:
                raise InvalidMesh(f"Vertex {vertex} is non-manifold")
            fan[prev_vertex] = (next_vertex, normal)

    cones = []
    for vertex in range(len(poly.vertices)):
        fan = sectors[vertex]
        origin = poly.vertices[vertex]
        start = next(iter(fan))
        edges, virtual = [], []
        current = start
        for _ in range(len(fan)):
            following, normal = fan[current]
            d_prev = _normalize(poly.vertices[current] - origin)
            d_next = _normalize(poly.vertices[following] - origin)
            edges.append(d_prev)
            for direction in _split_sector(d_prev, d_next, normal):
                virtual.append(len(edges))
                edges.append(direction)
            current = following
            if current not in fan:
                raise InvalidMesh(f"Faces around vertex {vertex} do not close up")
            if current == start:
                break
        if current != start or len(edges) - len(virtual) != len(fan):
            raise InvalidMesh(f"Vertex {vertex} is non-manifold (several face fans)")
        cones.append(cone_from_edges(edges, virtual_corners=virtual))
    logger.info(f"Built {len(cones)} tangent cones")
    return cones


def tangent_cones(poly: Polyhedron) -> List[PolyhedralCone]:
    """One tangent cone per vertex, edges in cyclic order"""
    return list(poly.tangent_cones)
