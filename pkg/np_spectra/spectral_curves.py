"""
NP Spectra - Essential Spectrum Curves
======================================
Closed-form curves Sigma_{alpha,beta} traced by a corner of interior angle
beta in the weighted space L^2_alpha, region membership by winding numbers,
and the 2D polygon reference spectra.

    Sigma_{alpha,beta}(xi) = 1/2 sin((pi - beta) w) / sin(pi w),
    w = (1 - alpha)/2 + i xi
"""

import csv
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from .errors import InvalidParams, OnCurve
from .schemas import PolygonSpace, RegionKind, RegionSet

logger = logging.getLogger(__name__)

DEFAULT_CURVE_POINTS = 2048
ON_CURVE_TOL = 1e-9
# grid points are equally spaced in tanh(GRID_STRETCH * xi / xi_cut)
GRID_STRETCH = 3.0
FLAT_TOL = 1e-12


def _check_params(alpha: float, beta: float):
    if not 0 <= alpha < 1:
        raise InvalidParams(f"alpha must lie in [0, 1), got {alpha}")
    if not 0 < beta < 2 * np.pi:
        raise InvalidParams(f"beta must lie in (0, 2*pi), got {beta}")


# ============================================================================
# CLOSED FORMS
# ============================================================================

def sigma_point(alpha: float, beta: float, xi: Union[float, np.ndarray]):
    """
    Evaluate Sigma_{alpha,beta} at xi (scalar or array).

    Evaluated as 1/2 (e^{i(2pi-beta)w} - e^{i beta w}) / (e^{2 i pi w} - 1)
    for xi >= 0, where every exponential decays, and by conjugation for
    xi < 0. This stays finite for any |xi|.
    """
    _check_params(alpha, beta)
    xi_arr = np.asarray(xi, dtype=float)
    w = (1.0 - alpha) / 2.0 + 1j * np.abs(xi_arr)
    value = 0.5 * (np.exp(1j * (2 * np.pi - beta) * w) - np.exp(1j * beta * w)) \
        / (np.exp(2j * np.pi * w) - 1.0)
    value = np.where(xi_arr < 0, np.conj(value), value)
    # real on the axis of symmetry
    value = np.where(xi_arr == 0, value.real + 0j, value)
    if np.ndim(xi) == 0:
        return complex(value)
    return value


def sigma_max(alpha: float, beta: float) -> float:
    """Maximum modulus of Sigma_{alpha,beta}, attained at xi = 0"""
    if not 0 <= alpha <= 1:
        raise InvalidParams(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 1:
        return abs(1.0 - beta / np.pi) / 2.0
    half = (1.0 - alpha) / 2.0
    return 0.5 * abs(np.sin((np.pi - beta) * half) / np.sin(np.pi * half))


def essential_radius(angles: Iterable[float], alpha: float) -> float:
    """max_j sigma_max(alpha, beta_j); alpha = 1 gives the energy-space radius"""
    return max(sigma_max(alpha, float(beta)) for beta in angles)


# ============================================================================
# SAMPLED CURVES
# ============================================================================

@dataclass(frozen=True, eq=False)
class SpectralCurve:
    alpha: float
    beta: float
    xi: np.ndarray
    values: np.ndarray

    @property
    def samples(self) -> List[Tuple[float, complex]]:
        return list(zip(self.xi.tolist(), self.values.tolist()))

    @property
    def radius(self) -> float:
        return sigma_max(self.alpha, self.beta)

    def closed(self, reflected: bool = False) -> np.ndarray:
        """Sampled polyline closed through the limit point 0"""
        points = -self.values if reflected else self.values
        return np.concatenate([points, [0.0 + 0.0j], points[:1]])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "sigma_max": self.radius,
            "n_samples": int(len(self.xi)),
            "reflected": True
        }


def curve_grid(beta: float, n_points: int = DEFAULT_CURVE_POINTS) -> np.ndarray:
    """
    Symmetric xi-grid on [-xi_cut, xi_cut], xi_cut = 40 / min(beta, 2pi - beta, pi),
    equally spaced in tanh. An even count is bumped by one so xi = 0 is sampled.
    """
    if n_points < 8:
        raise InvalidParams(f"Curve needs at least 8 samples, got {n_points}")
    if n_points % 2 == 0:
        n_points += 1
    xi_cut = 40.0 / min(beta, 2 * np.pi - beta, np.pi)
    edge = np.tanh(GRID_STRETCH)
    u = np.linspace(-edge, edge, n_points)
    return xi_cut * np.arctanh(u) / GRID_STRETCH


@lru_cache(maxsize=256)
def _cached_curve(alpha: float, beta: float, n_points: int) -> SpectralCurve:
    xi = curve_grid(beta, n_points)
    values = sigma_point(alpha, beta, xi)
    xi.setflags(write=False)
    values.setflags(write=False)
    return SpectralCurve(alpha=alpha, beta=beta, xi=xi, values=values)


def sample_curve(alpha: float, beta: float,
                 n_points: int = DEFAULT_CURVE_POINTS) -> SpectralCurve:
    _check_params(alpha, beta)
    return _cached_curve(float(alpha), float(beta), int(n_points))


def curve_family(beta: float, alphas: Sequence[float],
                 n_points: int = DEFAULT_CURVE_POINTS) -> List[SpectralCurve]:
    """Nested curves Sigma_{alpha,beta} for several alpha, in the given order"""
    return [sample_curve(alpha, beta, n_points) for alpha in alphas]


def curve_to_csv(curve: SpectralCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["xi", "re", "im"])
        for xi, value in zip(curve.xi.tolist(), curve.values.tolist()):
            writer.writerow([repr(xi), repr(value.real), repr(value.imag)])
    logger.info(f"Wrote {len(curve.xi)} curve samples to {path}")


# ============================================================================
# WINDING AND MEMBERSHIP
# ============================================================================

def _distance_to_polyline(lam: complex, points: np.ndarray) -> float:
    start, end = points[:-1], points[1:]
    seg = end - start
    length2 = np.abs(seg) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(length2 > 0, ((lam - start) * np.conj(seg)).real / length2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    return float(np.min(np.abs(start + t * seg - lam)))


def winding_number(lam: complex, curve: SpectralCurve, reflected: bool = False) -> int:
    """
    Winding number of the closed sampled curve (or its reflection -Sigma)
    around lam, from summed angle increments.

    Raises:
        OnCurve: lam lies within 1e-9 of the sampled curve
    """
    points = curve.closed(reflected)
    if _distance_to_polyline(complex(lam), points) < ON_CURVE_TOL:
        raise OnCurve(f"lambda={lam} lies on the curve (alpha={curve.alpha}, beta={curve.beta})")
    rel = points - lam
    turns = np.angle(rel[1:] / rel[:-1])
    return int(round(float(np.sum(turns)) / (2 * np.pi)))


def region_membership(lam: complex, angles: Iterable[float], alpha: float,
                      n_points: int = DEFAULT_CURVE_POINTS) -> bool:
    """True iff lam lies on or inside some Sigma_{alpha,beta_j} or its reflection"""
    lam = complex(lam)
    for beta in angles:
        beta = float(beta)
        if abs(beta - np.pi) < FLAT_TOL:
            # flat corner: the curve collapses to 0
            if abs(lam) < ON_CURVE_TOL:
                return True
            continue
        curve = sample_curve(alpha, beta, n_points)
        for reflected in (False, True):
            try:
                if winding_number(lam, curve, reflected) != 0:
                    return True
            except OnCurve:
                return True
    return False


# ============================================================================
# 2D POLYGON REFERENCE SPECTRA
# ============================================================================

def polygon_spectrum_2d(angles: Sequence[float],
                        space: Union[PolygonSpace, str]) -> RegionSet:
    """
    Spectrum of the NP operator on a curvilinear polygon with the given
    interior angles: an interval in H^{1/2}, curve regions in L^2.
    """
    space = PolygonSpace(space)
    angles = [float(beta) for beta in angles]
    for beta in angles:
        if not 0 < beta < 2 * np.pi:
            raise InvalidParams(f"Polygon angle {beta} outside (0, 2*pi)")

    if space == PolygonSpace.SOBOLEV_HALF:
        m = essential_radius(angles, 1.0)
        return RegionSet(kind=RegionKind.INTERVAL, intervals=[(-m, m)])

    distinct = sorted({beta for beta in angles if abs(beta - np.pi) >= FLAT_TOL})
    if not distinct:
        return RegionSet(kind=RegionKind.INTERVAL, intervals=[(0.0, 0.0)])
    curves = [sample_curve(0.0, beta) for beta in distinct]
    return RegionSet(kind=RegionKind.CURVE_UNION, curves=curves,
                     disk_radius=essential_radius(distinct, 0.0))
