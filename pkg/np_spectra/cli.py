"""
NP Spectra - Command Line
=========================
Subcommands:

    curve       sample Sigma_{alpha,beta}
    cone        spectrum report for a polyhedral cone (JSON edges file)
    polyhedron  essential spectrum of a polyhedron (JSON vertices/faces file)
    sweep       eigenvalue branches of a cone over xi
    kernel      evaluate a Mellin integral (debug aid)

Exit codes: 0 success, 1 unexpected failure, 2 invalid input or geometry,
3 energy space requested for a non-Lipschitz geometry, 4 no convergence.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from config import get_config
from . import __version__
from .errors import InvalidParams, NPSpectraError
from .geometry import cone_from_dict, polyhedron_from_dict, solid_angle
from .mellin_kernels import mellin_integral
from .nystrom import build_mesh, assemble, dump_matrices
from .reporting import (corner_curves, dumps, report_document, write_branch_csv,
                        write_geometry, write_json, write_svg)
from .schemas import KernelKind, SolverOptions, Space
from .spectra import (cone_energy_spectrum, cone_weighted_spectrum,
                      polyhedron_essential_spectrum, run_sweep)
from .spectral_curves import curve_to_csv, sample_curve, sigma_max

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("curve", "cone", "polyhedron", "sweep", "kernel")
KERNEL_KINDS = {"m3": KernelKind.THREE_HALF, "m1": KernelKind.ONE_HALF}


@dataclass
class RunConfig:
    subcommand: str
    space: Space = Space.ENERGY
    alpha: Optional[float] = None
    beta: Optional[float] = None
    xi: float = 0.0
    a: float = 0.0
    kind: str = "m3"
    input_path: Optional[str] = None
    json_path: Optional[str] = None
    csv_path: Optional[str] = None
    svg_path: Optional[str] = None
    dump_dir: Optional[str] = None
    echo_geometry: bool = False
    seed: int = 0
    options: SolverOptions = field(default_factory=SolverOptions)

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise InvalidParams(f"Unknown subcommand {self.subcommand!r}")
        if self.subcommand in ("cone", "polyhedron", "sweep") and not self.input_path:
            raise InvalidParams(f"{self.subcommand} needs a geometry file")
        weighted = self.space == Space.WEIGHTED or self.subcommand in ("curve", "sweep")
        if weighted and self.alpha is not None and not 0 <= self.alpha < 1:
            raise InvalidParams(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.subcommand == "curve" and (self.alpha is None or self.beta is None):
            raise InvalidParams("curve needs --alpha and --beta")

    @property
    def working_alpha(self) -> float:
        return self.options.default_alpha if self.alpha is None else self.alpha

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["space"] = self.space.value
        data["options"] = self.options.to_dict()
        return data


# ============================================================================
# SUBCOMMANDS
# ============================================================================

def _load_json(path: str) -> Dict[str, Any]:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidParams(f"Cannot read geometry file {path}: {e}")


def _emit(document: Dict[str, Any], config: RunConfig) -> None:
    if config.json_path:
        write_json(document, config.json_path)
    else:
        sys.stdout.write(dumps(document))


def _run_curve(config: RunConfig) -> int:
    curve = sample_curve(config.alpha, config.beta)
    if config.csv_path:
        curve_to_csv(curve, config.csv_path)
    document = {
        "version": __version__,
        "config": config.to_dict(),
        "curve": curve.to_dict(),
        "max_sample_modulus": float(np.max(np.abs(curve.values))),
        "sigma_max": sigma_max(config.alpha, config.beta)
    }
    _emit(document, config)
    return 0


def _run_kernel(config: RunConfig) -> int:
    kind = KERNEL_KINDS.get(config.kind)
    if kind is None:
        raise InvalidParams(f"--kind must be one of {sorted(KERNEL_KINDS)}")
    w = complex(1.5 if kind == KernelKind.THREE_HALF else 0.5, config.xi)
    result = mellin_integral(w, config.a, kind, config.options.quad_tol)
    document = {"version": __version__, "w": [w.real, w.imag], "a": config.a,
                "kind": config.kind}
    document.update(result.to_dict())
    _emit(document, config)
    return 0


def _dump(cone, config: RunConfig, prefix: str) -> None:
    options = config.options
    mesh = build_mesh(cone.cross_section, options.panels_per_arc, options.gauss_order,
                      options.grading_levels)
    system = assemble(cone.cross_section, mesh, 0.0, config.working_alpha,
                      quad_tol=options.quad_tol)
    dump_matrices(system, config.dump_dir, prefix=prefix)


def _run_cone(config: RunConfig) -> int:
    data = _load_json(config.input_path)
    cone = cone_from_dict(data)
    if config.echo_geometry:
        sys.stdout.write(write_geometry(cone.to_dict()))
        return 0
    if config.dump_dir:
        _dump(cone, config, "cone")
    if config.space == Space.ENERGY:
        report = cone_energy_spectrum(cone, config.options)
        curves = None
    else:
        report = cone_weighted_spectrum(cone, config.working_alpha, config.options)
        curves = corner_curves(cone.angles, config.working_alpha)
    _write_report(report, config, curves, [_geometry_summary(cone)])
    return 0


def _run_polyhedron(config: RunConfig) -> int:
    data = _load_json(config.input_path)
    poly = polyhedron_from_dict(data)
    if config.echo_geometry:
        sys.stdout.write(write_geometry(poly.to_dict()))
        return 0
    if config.dump_dir:
        for i, cone in enumerate(poly.tangent_cones):
            _dump(cone, config, f"v{i}")
    report = polyhedron_essential_spectrum(poly, config.space, config.options,
                                           alpha=config.alpha)
    _write_report(report, config, None, [_geometry_summary(cone) for cone in poly.tangent_cones])
    return 0


def _run_sweep(config: RunConfig) -> int:
    cone = cone_from_dict(_load_json(config.input_path))
    options = config.options
    branches, skipped = run_sweep(cone, config.working_alpha, options.xi_max,
                                  options.xi_steps, options)
    document = {
        "version": __version__,
        "config": config.to_dict(),
        "alpha": config.working_alpha,
        "branches": [b.to_dict() for b in branches],
        "skipped_xi": skipped
    }
    _emit(document, config)
    return 0


def _geometry_summary(cone) -> Dict[str, Any]:
    return {
        "angles": cone.angles.tolist(),
        "solid_angle": solid_angle(cone),
        "convex": cone.convex,
        "lipschitz": cone.lipschitz,
        "virtual_corners": list(cone.virtual_corners)
    }


def _write_report(report, config: RunConfig, curves: Optional[List],
                  geometry: List[Dict[str, Any]]) -> None:
    document = report_document(report, __version__, config.to_dict())
    document["geometry"] = geometry
    _emit(document, config)
    if config.csv_path:
        write_branch_csv(report, config.csv_path)
    if config.svg_path:
        write_svg(report, config.svg_path, curves)


HANDLERS = {
    "curve": _run_curve,
    "cone": _run_cone,
    "polyhedron": _run_polyhedron,
    "sweep": _run_sweep,
    "kernel": _run_kernel
}


def run(config: RunConfig) -> int:
    """Execute one subcommand and map failures to exit codes"""
    try:
        config.validate()
        return HANDLERS[config.subcommand](config)
    except NPSpectraError as e:
        logger.error(f"{type(e).__name__}: {e}")
        sys.stderr.write(json.dumps(e.to_dict()) + "\n")
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e),
                                     "exit_code": 1}) + "\n")
        return 1


# ============================================================================
# ARGUMENT PARSING
# ============================================================================

def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--log-level", default=None, help="Logging level (default from config)")
    parser.add_argument("--env", default=None, help="Config name: development or production")
    parser.add_argument("--json", dest="json_path", default=None, help="Write JSON here instead of stdout")
    parser.add_argument("--seed", type=int, default=0, help="Seed recorded for randomized diagnostics")


def _solver(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--space", choices=[s.value for s in Space], default=Space.ENERGY.value)
    parser.add_argument("--alpha", type=float, default=None, help="Weight exponent in [0, 1)")
    parser.add_argument("--xi-max", type=float, default=None)
    parser.add_argument("--xi-steps", type=int, default=None)
    parser.add_argument("--panels", type=int, default=None, help="Panels per arc (coarse mesh)")
    parser.add_argument("--refined-panels", type=int, default=None, help="Panels per arc (refined mesh)")
    parser.add_argument("--order", type=int, default=None, help="Gauss-Legendre order per panel")
    parser.add_argument("--grading", type=int, default=None, help="Geometric grading levels")
    parser.add_argument("--csv", dest="csv_path", default=None, help="Branch CSV output")
    parser.add_argument("--svg", dest="svg_path", default=None, help="SVG region plot output")
    parser.add_argument("--dump-matrices", dest="dump_dir", default=None,
                        help="Directory for binary A/B dumps at xi=0")
    parser.add_argument("--echo-geometry", action="store_true",
                        help="Print the parsed geometry as JSON and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="np-spectra",
                                     description="Spectra of the Neumann-Poincare operator on polyhedral cones")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    curve = sub.add_parser("curve", help="Sample the curve Sigma_{alpha,beta}")
    _common(curve)
    curve.add_argument("--alpha", type=float, required=True)
    curve.add_argument("--beta", type=float, required=True)
    curve.add_argument("--csv", dest="csv_path", default=None, help="Curve samples CSV (xi, re, im)")

    for name, help_text in (("cone", "Spectrum report for a cone"),
                            ("polyhedron", "Essential spectrum of a polyhedron"),
                            ("sweep", "Eigenvalue branches of a cone over xi")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("input_path", help="Geometry JSON file")
        _common(p)
        _solver(p)

    kernel = sub.add_parser("kernel", help="Evaluate a Mellin integral")
    _common(kernel)
    kernel.add_argument("--xi", type=float, default=0.0)
    kernel.add_argument("--a", type=float, required=True)
    kernel.add_argument("--kind", choices=sorted(KERNEL_KINDS), default="m3")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = get_config(args.env)
    options = SolverOptions.from_config(
        cfg,
        panels_per_arc=getattr(args, "panels", None),
        refined_panels_per_arc=getattr(args, "refined_panels", None),
        gauss_order=getattr(args, "order", None),
        grading_levels=getattr(args, "grading", None),
        xi_max=getattr(args, "xi_max", None),
        xi_steps=getattr(args, "xi_steps", None)
    )
    return RunConfig(
        subcommand=args.subcommand,
        space=Space(getattr(args, "space", Space.ENERGY.value)),
        alpha=getattr(args, "alpha", None),
        beta=getattr(args, "beta", None),
        xi=getattr(args, "xi", 0.0),
        a=getattr(args, "a", 0.0),
        kind=getattr(args, "kind", "m3"),
        input_path=getattr(args, "input_path", None),
        json_path=args.json_path,
        csv_path=getattr(args, "csv_path", None),
        svg_path=getattr(args, "svg_path", None),
        dump_dir=getattr(args, "dump_dir", None),
        echo_geometry=getattr(args, "echo_geometry", False),
        seed=args.seed,
        options=options
    )


def main(argv: Optional[List[str]] = None) -> int:
    """CLI entrypoint"""
    args = build_parser().parse_args(argv)
    cfg = get_config(args.env)
    level = (args.log_level or os.environ.get("NP_SPECTRA_LOG_LEVEL") or cfg.LOG_LEVEL).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    config = config_from_args(args)
    logger.debug(f"Resolved run config: {config.to_dict()}")
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
