"""
NP Spectra - Spectrum Reports
=============================
Eigenvalue branches of H(i xi) swept over xi >= 0, spectrum reports for
polyhedral cones in the energy space and in weighted L^2 spaces, their
union over the tangent cones of a polyhedron, and the map between the
spectral parameter lambda and the permittivity epsilon.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidParams, NoConvergence, NotLipschitz, PoleInput
from .geometry import PolyhedralCone, Polyhedron, congruence_key
from .nystrom import EigenResult, isolated_eigenvalues, system_for
from .schemas import (EigenBranch, Estimate, LambdaInterval, MapDirection,
                      RegionKind, RegionSet, SolverOptions, Space, SpectrumReport)
from .spectral_curves import essential_radius, sample_curve

logger = logging.getLogger(__name__)

MIN_XI_STEPS = 8
POLE_TOL = 1e-15
# cost assigned to forbidden pairings in branch stitching
FORBIDDEN = 1e6

CAVEATS = {
    "complex_gap": "Complex points inside the disk bracket but outside the curve regions "
                   "are not characterized: the resolvent there is not controlled.",
    "mu_minus_open": "Whether mu_minus = 0 for convex cones is an open question; "
                     "a missing negative branch is not evidence of mu_minus = 0.",
    "mu_minus_missing": "mu_minus not detected: no negative isolated eigenvalue above the "
                        "threshold; reported as null, i.e. mu_minus <= threshold.",
    "convexity_violation": "Computed mu_minus exceeds mu_plus on a convex cone, contradicting "
                           "mu_minus <= mu_plus; treat both estimates as unreliable.",
    "localization": "Localization to tangent cones could in principle add isolated eigenvalues "
                    "for specific polyhedra; none are computed here.",
    "lipschitz_heuristic": "Lipschitz flags come from a radial-graph test over candidate axes "
                           "and may reject Lipschitz cones with unusual axes.",
    "tail": "A branch is still above the threshold at xi_max; mu estimates beyond xi_max are "
            "not certified."
}


# ============================================================================
# PLASMONIC MAP
# ============================================================================

def plasmonic_map(value: Union[float, complex],
                  direction: Union[MapDirection, str]) -> complex:
    """
    lambda_to_eps: eps = (1 + 2 lambda) / (2 lambda - 1)
    eps_to_lambda: lambda = (eps + 1) / (2 (eps - 1))

    Raises:
        PoleInput: lambda = 1/2 or eps = 1
    """
    direction = MapDirection(direction)
    value = complex(value)
    if direction == MapDirection.LAMBDA_TO_EPS:
        if abs(value - 0.5) < POLE_TOL:
            raise PoleInput("lambda = 1/2 has no finite permittivity")
        return (1.0 + 2.0 * value) / (2.0 * value - 1.0)
    if abs(value - 1.0) < POLE_TOL:
        raise PoleInput("eps = 1 has no finite spectral parameter")
    return (value + 1.0) / (2.0 * (value - 1.0))


def real_extent(report: SpectrumReport) -> Tuple[float, float]:
    """Smallest real interval containing the real spectrum of the report"""
    if report.essential_core.kind == RegionKind.INTERVAL:
        lo, hi = report.essential_core.intervals[0]
    else:
        radius = report.essential_core.disk_radius or 0.0
        lo, hi = -radius, radius
    if report.mu_plus is not None:
        hi = max(hi, report.mu_plus.value)
    if report.mu_minus is not None:
        lo = min(lo, -report.mu_minus.value)
    return lo, hi


def permittivity_intervals(report: SpectrumReport) -> List[Tuple[float, float]]:
    """
    Permittivities eps < 0 whose lambda lies in the real spectrum. The map is
    decreasing on (-1/2, 1/2), so [lo, hi] goes to [eps(hi), eps(lo)].
    """
    lo, hi = real_extent(report)
    lo, hi = max(lo, -0.5), min(hi, 0.5)
    if hi >= 0.5:
        return [(float("-inf"), plasmonic_map(lo, MapDirection.LAMBDA_TO_EPS).real)]
    return [(plasmonic_map(hi, MapDirection.LAMBDA_TO_EPS).real,
             plasmonic_map(lo, MapDirection.LAMBDA_TO_EPS).real)]


# ============================================================================
# SWEEP
# ============================================================================

def eigen_at(cone: PolyhedralCone, xi: float, alpha: float, options: SolverOptions,
             threshold: Optional[float] = None) -> EigenResult:
    """Filtered isolated eigenvalues at one xi from the coarse/refined mesh pair"""
    polygon = cone.cross_section
    coarse = system_for(polygon, xi, alpha, options.panels_per_arc, options)
    refined = system_for(polygon, xi, alpha, options.refined_panels_per_arc, options)
    return isolated_eigenvalues(coarse, refined, threshold=threshold, options=options)


def _eigen_or_none(cone, xi, alpha, options, threshold) -> Optional[EigenResult]:
    try:
        return eigen_at(cone, xi, alpha, options, threshold)
    except NoConvergence as e:
        logger.warning(f"Skipping xi={xi}: {e}")
        return None


def _provenance(options: SolverOptions, threshold: float) -> Dict[str, float]:
    return {
        "panels_per_arc": options.panels_per_arc,
        "refined_panels_per_arc": options.refined_panels_per_arc,
        "gauss_order": options.gauss_order,
        "grading_levels": options.grading_levels,
        "threshold": threshold
    }


def _stitch(results: Sequence[Tuple[float, Optional[EigenResult]]], alpha: float,
            options: SolverOptions, provenance: Dict) -> Tuple[List[EigenBranch], List[EigenBranch]]:
    """
    Link eigenvalues at consecutive xi into branches. A pairing is allowed
    when |d lambda| <= slope_cap * d xi + tau_match. Returns (all branches,
    branches that terminated mid-sweep).
    """
    branches: List[EigenBranch] = []
    active: List[EigenBranch] = []
    terminated: List[EigenBranch] = []
    for xi, result in results:
        if result is None:
            continue
        values = np.array(result.eigenvalues_filtered)
        gaps = result.refinement_agreement
        matched_values = set()
        still_active = []
        if active and len(values):
            last = np.array([b.last for b in active])
            allowed = options.slope_cap * (xi - last[:, 0]) + options.tau_match
            cost = np.abs(last[:, 1][:, None] - values[None, :])
            cost = np.where(cost <= allowed[:, None], cost, FORBIDDEN)
            rows, cols = linear_sum_assignment(cost)
            pairs = {r: c for r, c in zip(rows, cols) if cost[r, c] < FORBIDDEN}
        else:
            pairs = {}
        for i, branch in enumerate(active):
            if i in pairs:
                branch.samples.append((xi, float(values[pairs[i]])))
                branch.provenance["agreement"][repr(xi)] = gaps[pairs[i]]
                matched_values.add(pairs[i])
                still_active.append(branch)
            else:
                branch.termination = (branch.last[0], xi)
                terminated.append(branch)
        for k, value in enumerate(values):
            if k in matched_values:
                continue
            branch = EigenBranch(alpha=alpha, samples=[(xi, float(value))],
                                 provenance=dict(provenance, agreement={repr(xi): gaps[k]}))
            if xi > 0:
                branch.annotations.append(f"emerges at xi={xi!r}")
            branches.append(branch)
            still_active.append(branch)
        active = still_active
    for branch in active:
        branch.annotations.append("active at xi_max")
    return branches, terminated


def _refine_termination(branch: EigenBranch, cone, alpha, options, threshold):
    """Bisect the termination bracket, extending the branch while it persists"""
    lo, hi = branch.termination
    for _ in range(options.termination_bisections):
        mid = 0.5 * (lo + hi)
        result = _eigen_or_none(cone, mid, alpha, options, threshold)
        if result is None:
            break
        last_xi, last_lam = branch.last
        allowed = options.slope_cap * (mid - last_xi) + options.tau_match
        close = [(v, g) for v, g in zip(result.eigenvalues_filtered, result.refinement_agreement)
                 if abs(v - last_lam) <= allowed]
        if close:
            k = min(range(len(close)), key=lambda i: abs(close[i][0] - last_lam))
            value, gap = close[k]
            branch.samples.append((mid, float(value)))
            branch.provenance["agreement"][repr(mid)] = gap
            lo = mid
        else:
            hi = mid
    branch.termination = (lo, hi)
    branch.annotations.append(
        f"absorbed into the essential region between xi={lo!r} and xi={hi!r}")


def run_sweep(cone: PolyhedralCone, alpha: float, xi_max: float, xi_steps: int,
              options: Optional[SolverOptions] = None,
              threshold: Optional[float] = None) -> Tuple[List[EigenBranch], List[float]]:
    """Sweep with bookkeeping: returns (branches, skipped xi values)"""
    options = options or SolverOptions.from_config()
    if not xi_max > 0:
        raise InvalidParams(f"xi_max must be positive, got {xi_max}")
    if xi_steps < MIN_XI_STEPS:
        raise InvalidParams(f"xi_steps must be at least {MIN_XI_STEPS}, got {xi_steps}")
    if threshold is None:
        threshold = essential_radius(cone.angles, alpha)

    grid = np.linspace(0.0, xi_max, xi_steps).tolist()
    logger.info(f"Sweeping {xi_steps} xi values on [0, {xi_max}] at alpha={alpha} "
                f"with {options.threads} worker(s)")
    with ThreadPoolExecutor(max_workers=options.threads) as pool:
        results = list(pool.map(
            lambda xi: _eigen_or_none(cone, xi, alpha, options, threshold), grid))

    skipped = [xi for xi, result in zip(grid, results) if result is None]
    branches, terminated = _stitch(list(zip(grid, results)), alpha, options,
                                   _provenance(options, threshold))
    for branch in terminated:
        _refine_termination(branch, cone, alpha, options, threshold)
    logger.info(f"Sweep finished: {len(branches)} branch(es), {len(skipped)} skipped point(s)")
    return branches, skipped


def sweep_branches(cone: PolyhedralCone, alpha: float, xi_max: float, xi_steps: int,
                   options: Optional[SolverOptions] = None,
                   threshold: Optional[float] = None) -> List[EigenBranch]:
    """Isolated eigenvalue branches over xi in [0, xi_max]; -xi mirrors exactly"""
    branches, _ = run_sweep(cone, alpha, xi_max, xi_steps, options, threshold)
    return branches


# ============================================================================
# MU ESTIMATES
# ============================================================================

def _extremes(branches: Sequence[EigenBranch]) -> Tuple[Optional[float], Optional[float]]:
    positives = [lam for b in branches for lam in b.values if lam > 0]
    negatives = [-lam for b in branches for lam in b.values if lam < 0]
    return (max(positives) if positives else None,
            max(negatives) if negatives else None)


def _agreement_of(branches: Sequence[EigenBranch], target: Optional[float], sign: float) -> float:
    """Refinement gap recorded for the sample that realizes an extreme value"""
    if target is None:
        return 0.0
    for branch in branches:
        gaps = branch.provenance.get("agreement", {})
        for xi, lam in branch.samples:
            if sign * lam == target:
                return float(gaps.get(repr(xi), 0.0))
    return 0.0


def _branches_at_zero(result: EigenResult, alpha: float, provenance: Dict) -> List[EigenBranch]:
    branches = []
    for value, gap in zip(result.eigenvalues_filtered, result.refinement_agreement):
        prov = dict(provenance)
        prov["agreement"] = {repr(0.0): gap}
        branches.append(EigenBranch(alpha=alpha, samples=[(0.0, value)], provenance=prov,
                                    annotations=["convex cone: evaluated at xi=0 only"]))
    return branches


def _estimate(values: Sequence[Optional[float]], gaps: Sequence[float],
              tau: float) -> Optional[Estimate]:
    found = [v for v in values if v is not None]
    if not found:
        return None
    spread = max(found) - min(found)
    return Estimate(value=found[-1], uncertainty=max(spread, max(gaps, default=0.0), tau))


def _lambda_star(threshold: float, mu_plus: Optional[Estimate],
                 mu_minus: Optional[Estimate]) -> List[LambdaInterval]:
    negative = LambdaInterval(-mu_minus.value, -threshold, True, False) if mu_minus \
        else LambdaInterval(-threshold, -threshold, False, False)
    positive = LambdaInterval(threshold, mu_plus.value, False, True) if mu_plus \
        else LambdaInterval(threshold, threshold, False, False)
    return [negative, positive]


# ============================================================================
# CONE REPORTS
# ============================================================================

def cone_energy_spectrum(cone: PolyhedralCone,
                         options: Optional[SolverOptions] = None) -> SpectrumReport:
    """
    Spectrum in the energy space: the exact interval [-m, m], m = max |1 - beta/pi| / 2,
    plus isolated eigenvalue branches estimated along the alpha ladder.

    Raises:
        NotLipschitz: the cone fails the Lipschitz test
    """
    options = options or SolverOptions.from_config()
    if not cone.lipschitz:
        raise NotLipschitz("Energy-space spectrum requires a Lipschitz cone")

    m = essential_radius(cone.angles, 1.0)
    provenance = _provenance(options, m)
    ladder = sorted(options.alpha_ladder)
    branches: List[EigenBranch] = []
    skipped: List[float] = []
    plus_values, minus_values, gaps = [], [], []
    alpha_estimates = {}

    for alpha in ladder:
        if cone.convex:
            result = eigen_at(cone, 0.0, alpha, options, threshold=m)
            alpha_branches = _branches_at_zero(result, alpha, provenance)
            alpha_skipped = []
        else:
            alpha_branches, alpha_skipped = run_sweep(cone, alpha, options.xi_max, options.xi_steps,
                                                      options, threshold=m)
        mu_p, mu_m = _extremes(alpha_branches)
        plus_values.append(mu_p)
        minus_values.append(mu_m)
        gaps.append(max(_agreement_of(alpha_branches, mu_p, 1.0),
                        _agreement_of(alpha_branches, mu_m, -1.0)))
        alpha_estimates[repr(alpha)] = {"mu_plus": mu_p, "mu_minus": mu_m}
        branches.extend(alpha_branches)
        skipped.extend(xi for xi in alpha_skipped if xi not in skipped)

    mu_plus = _estimate(plus_values, gaps, options.tau_match)
    mu_minus = _estimate(minus_values, gaps, options.tau_match)

    caveats = []
    if mu_minus is None:
        caveats.append(CAVEATS["mu_minus_missing"])
    if cone.convex:
        caveats.append(CAVEATS["mu_minus_open"])
        if mu_minus and mu_plus and mu_minus.value > mu_plus.value:
            caveats.append(CAVEATS["convexity_violation"])
    if any("active at xi_max" in b.annotations for b in branches):
        caveats.append(CAVEATS["tail"])

    report = SpectrumReport(
        space=Space.ENERGY,
        essential_core=RegionSet(kind=RegionKind.INTERVAL, intervals=[(-m, m)]),
        threshold=m,
        lambda_star_intervals=_lambda_star(m, mu_plus, mu_minus),
        mu_plus=mu_plus,
        mu_minus=mu_minus,
        branches=branches,
        caveats=caveats,
        alpha_estimates=alpha_estimates,
        skipped_xi=sorted(skipped),
        convex_shortcut=cone.convex
    )
    report.permittivity_intervals = permittivity_intervals(report)
    logger.info(f"Energy spectrum: m={m:.6f}, mu_plus={mu_plus.value if mu_plus else None}")
    return report


def _region_curves(angles: Sequence[float], alpha: float):
    distinct = sorted({round(float(beta), 12) for beta in angles if abs(beta - np.pi) > 1e-12})
    return [sample_curve(alpha, beta) for beta in distinct]


def cone_weighted_spectrum(cone: PolyhedralCone, alpha: float,
                           options: Optional[SolverOptions] = None) -> SpectrumReport:
    """
    Spectrum bracket in L^2_alpha: inner set is the union of curve regions
    plus Lambda^alpha, outer set the disk of radius max sigma_max plus
    Lambda^alpha. No Lipschitz requirement.
    """
    options = options or SolverOptions.from_config()
    if not 0 <= alpha < 1:
        raise InvalidParams(f"alpha must lie in [0, 1), got {alpha}")
    radius = essential_radius(cone.angles, alpha)
    branches, skipped = run_sweep(cone, alpha, options.xi_max, options.xi_steps,
                                  options, threshold=radius)
    mu_p, mu_m = _extremes(branches)
    gap = max(_agreement_of(branches, mu_p, 1.0), _agreement_of(branches, mu_m, -1.0))
    mu_plus = _estimate([mu_p], [gap], options.tau_match)
    mu_minus = _estimate([mu_m], [gap], options.tau_match)

    caveats = [CAVEATS["complex_gap"]]
    if not cone.lipschitz:
        caveats.append(CAVEATS["lipschitz_heuristic"])
    if any("active at xi_max" in b.annotations for b in branches):
        caveats.append(CAVEATS["tail"])

    report = SpectrumReport(
        space=Space.WEIGHTED,
        alpha=float(alpha),
        essential_core=RegionSet(kind=RegionKind.CURVE_UNION,
                                 curves=_region_curves(cone.angles, alpha),
                                 disk_radius=radius),
        threshold=radius,
        lambda_star_intervals=_lambda_star(radius, mu_plus, mu_minus),
        mu_plus=mu_plus,
        mu_minus=mu_minus,
        branches=branches,
        caveats=caveats,
        alpha_estimates={repr(float(alpha)): {"mu_plus": mu_p, "mu_minus": mu_m}},
        skipped_xi=skipped
    )
    report.permittivity_intervals = permittivity_intervals(report)
    logger.info(f"Weighted spectrum at alpha={alpha}: radius={radius:.6f}, "
                f"{len(branches)} branch(es)")
    return report


# ============================================================================
# POLYHEDRA
# ============================================================================

def _union_estimate(estimates: Sequence[Optional[Estimate]]) -> Optional[Estimate]:
    found = [e for e in estimates if e is not None]
    if not found:
        return None
    return max(found, key=lambda e: e.value)


def polyhedron_essential_spectrum(poly: Polyhedron, space: Union[Space, str],
                                  options: Optional[SolverOptions] = None,
                                  alpha: Optional[float] = None) -> SpectrumReport:
    """
    Essential spectrum of the polyhedron: the union of its tangent-cone
    spectra. Congruent cones are computed once.

    Raises:
        NotLipschitz: energy space requested and some vertex cone is not Lipschitz
    """
    space = Space(space)
    options = options or SolverOptions.from_config()
    cones = poly.tangent_cones
    if space == Space.ENERGY:
        bad = [i for i, cone in enumerate(cones) if not cone.lipschitz]
        if bad:
            raise NotLipschitz(f"Tangent cones at vertices {bad} are not Lipschitz")
    else:
        alpha = options.default_alpha if alpha is None else alpha

    classes: Dict[Tuple, int] = {}
    for i, cone in enumerate(cones):
        classes.setdefault(congruence_key(cone), i)
    unique = sorted(classes.values())
    logger.info(f"{len(cones)} vertices in {len(unique)} congruence class(es)")

    def solve(index: int) -> SpectrumReport:
        if space == Space.ENERGY:
            return cone_energy_spectrum(cones[index], options)
        return cone_weighted_spectrum(cones[index], alpha, options)

    with ThreadPoolExecutor(max_workers=max(1, min(options.threads, len(unique)))) as pool:
        solved = dict(zip(unique, pool.map(solve, unique)))

    per_vertex = {f"v{i}": solved[classes[congruence_key(cone)]] for i, cone in enumerate(cones)}
    reports = [solved[i] for i in unique]
    threshold = max(r.threshold for r in reports)
    mu_plus = _union_estimate([r.mu_plus for r in reports])
    mu_minus = _union_estimate([r.mu_minus for r in reports])
    # a cone's eigenvalue below the union threshold is already inside the core
    if mu_plus and mu_plus.value <= threshold:
        mu_plus = None
    if mu_minus and mu_minus.value <= threshold:
        mu_minus = None

    caveats = [CAVEATS["localization"]]
    for report in reports:
        caveats.extend(c for c in report.caveats if c not in caveats)

    if space == Space.ENERGY:
        core = RegionSet(kind=RegionKind.INTERVAL, intervals=[(-threshold, threshold)])
    else:
        angles = np.concatenate([cone.angles for cone in cones])
        core = RegionSet(kind=RegionKind.CURVE_UNION, curves=_region_curves(angles, alpha),
                         disk_radius=threshold)

    report = SpectrumReport(
        space=space,
        alpha=None if space == Space.ENERGY else float(alpha),
        essential_core=core,
        threshold=threshold,
        lambda_star_intervals=_lambda_star(threshold, mu_plus, mu_minus),
        mu_plus=mu_plus,
        mu_minus=mu_minus,
        per_vertex=per_vertex,
        caveats=caveats,
        skipped_xi=sorted({xi for r in reports for xi in r.skipped_xi}),
        convex_shortcut=all(r.convex_shortcut for r in reports)
    )
    report.permittivity_intervals = permittivity_intervals(report)
    return report
