"""
NP Spectra - Report Schemas
Dataclasses for spectrum reports and their JSON form
"""

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Tuple

if TYPE_CHECKING:
    from .spectral_curves import SpectralCurve


class Space(str, Enum):
    """Function space the spectrum is computed in"""
    ENERGY = "energy"
    WEIGHTED = "weighted"


class RegionKind(str, Enum):
    INTERVAL = "interval"
    CURVE_UNION = "curve_union"
    DISK_UNION = "disk_union"


class PolygonSpace(str, Enum):
    """Spaces for the 2D polygon reference spectra"""
    SOBOLEV_HALF = "sobolev_half"
    L2 = "l2"


class MapDirection(str, Enum):
    LAMBDA_TO_EPS = "lambda_to_eps"
    EPS_TO_LAMBDA = "eps_to_lambda"


class KernelKind(str, Enum):
    """Exponent on (t^2 - 2at + 1): -3/2 (double layer) or -1/2 (single layer)"""
    THREE_HALF = "three_half"
    ONE_HALF = "one_half"


@dataclass
class RegionSet:
    """
    A subset of the complex plane: real intervals, a union of curve regions
    (each curve together with its reflection -Sigma) or a disk bracket.
    """
    kind: RegionKind
    intervals: List[Tuple[float, float]] = field(default_factory=list)
    curves: List["SpectralCurve"] = field(default_factory=list)
    disk_radius: Optional[float] = None

    def __post_init__(self):
        self.intervals = sorted((float(lo), float(hi)) for lo, hi in self.intervals)
        for (lo, hi), (next_lo, _) in zip(self.intervals, self.intervals[1:]):
            if hi >= next_lo:
                raise ValueError(f"Intervals [{lo}, {hi}] and [{next_lo}, ...] overlap")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "intervals": [[lo, hi] for lo, hi in self.intervals],
            "curves": [curve.to_dict() for curve in self.curves],
            "disk_radius": self.disk_radius
        }


@dataclass
class LambdaInterval:
    """Real interval with explicit endpoint closedness, e.g. (m, mu_plus]"""
    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool

    @property
    def empty(self) -> bool:
        if self.lo < self.hi:
            return False
        return not (self.lo == self.hi and self.lo_closed and self.hi_closed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "lo_closed": self.lo_closed,
            "hi_closed": self.hi_closed
        }


@dataclass
class Estimate:
    value: float
    uncertainty: float

    def to_dict(self) -> Dict[str, float]:
        return {"value": self.value, "uncertainty": self.uncertainty}


@dataclass
class EigenBranch:
    """Real isolated eigenvalue traced over xi >= 0"""
    alpha: float
    samples: List[Tuple[float, float]] = field(default_factory=list)
    provenance: Dict[str, Any] = field(default_factory=dict)
    # (last xi where the branch was seen, first xi where it was not)
    termination: Optional[Tuple[float, float]] = None
    annotations: List[str] = field(default_factory=list)

    @property
    def values(self) -> List[float]:
        return [lam for _, lam in self.samples]

    @property
    def last(self) -> Tuple[float, float]:
        return self.samples[-1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "samples": [[xi, lam] for xi, lam in self.samples],
            "provenance": self.provenance,
            "termination": list(self.termination) if self.termination else None,
            "annotations": self.annotations
        }


@dataclass
class SpectrumReport:
    space: Space
    essential_core: RegionSet
    threshold: float
    alpha: Optional[float] = None
    lambda_star_intervals: List[LambdaInterval] = field(default_factory=list)
    mu_plus: Optional[Estimate] = None
    mu_minus: Optional[Estimate] = None
    branches: List[EigenBranch] = field(default_factory=list)
    per_vertex: Dict[str, "SpectrumReport"] = field(default_factory=dict)
    caveats: List[str] = field(default_factory=list)
    alpha_estimates: Dict[str, Dict[str, Optional[float]]] = field(default_factory=dict)
    permittivity_intervals: List[Tuple[float, float]] = field(default_factory=list)
    skipped_xi: List[float] = field(default_factory=list)
    convex_shortcut: bool = False

    @property
    def outer_set(self) -> Optional[RegionSet]:
        """Disk bracket around the curve regions; None for interval cores"""
        core = self.essential_core
        if core.kind != RegionKind.CURVE_UNION or core.disk_radius is None:
            return None
        return RegionSet(kind=RegionKind.DISK_UNION, disk_radius=core.disk_radius)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "space": self.space.value,
            "alpha": self.alpha,
            "threshold": self.threshold,
            "essential_core": self.essential_core.to_dict(),
            "outer_set": self.outer_set.to_dict() if self.outer_set else None,
            "lambda_star_intervals": [iv.to_dict() for iv in self.lambda_star_intervals],
            "mu_plus": self.mu_plus.to_dict() if self.mu_plus else None,
            "mu_minus": self.mu_minus.to_dict() if self.mu_minus else None,
            "alpha_estimates": self.alpha_estimates,
            "convex_shortcut": self.convex_shortcut,
            "permittivity_intervals": [[lo, hi] for lo, hi in self.permittivity_intervals],
            "branches": [branch.to_dict() for branch in self.branches],
            "skipped_xi": self.skipped_xi,
            "per_vertex": {key: sub.to_dict() for key, sub in self.per_vertex.items()},
            "caveats": self.caveats
        }


@dataclass
class SolverOptions:
    """Resolved numerical settings for one run"""
    panels_per_arc: int = 16
    refined_panels_per_arc: int = 24
    gauss_order: int = 10
    grading_levels: int = 4
    tau_im: float = 1e-6
    tau_match: float = 1e-3
    filter_margin: float = 0.05
    xi_max: float = 8.0
    xi_steps: int = 33
    slope_cap: float = 0.25
    termination_bisections: int = 3
    alpha_ladder: Tuple[float, ...] = (0.8, 0.9)
    default_alpha: float = 0.9
    quad_tol: float = 1e-11
    threads: int = 1

    @classmethod
    def from_config(cls, cfg=None, **overrides) -> "SolverOptions":
        """Build from a config class; overrides set to None are ignored"""
        if cfg is None:
            from config import get_config
            cfg = get_config()
        options = cls(
            panels_per_arc=cfg.PANELS_PER_ARC,
            refined_panels_per_arc=cfg.REFINED_PANELS_PER_ARC,
            gauss_order=cfg.GAUSS_ORDER,
            grading_levels=cfg.GRADING_LEVELS,
            tau_im=cfg.TAU_IM,
            tau_match=cfg.TAU_MATCH,
            filter_margin=cfg.FILTER_MARGIN,
            xi_max=cfg.XI_MAX,
            xi_steps=cfg.XI_STEPS,
            slope_cap=cfg.SLOPE_CAP,
            termination_bisections=cfg.TERMINATION_BISECTIONS,
            alpha_ladder=tuple(cfg.ALPHA_LADDER),
            default_alpha=cfg.DEFAULT_ALPHA,
            quad_tol=cfg.QUAD_TOL,
            threads=max(1, int(cfg.THREADS))
        )
        for key, value in overrides.items():
            if value is None:
                continue
            if not hasattr(options, key):
                raise AttributeError(f"Unknown solver option: {key}")
            setattr(options, key, value)
        return options

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["alpha_ladder"] = list(self.alpha_ladder)
        return data
