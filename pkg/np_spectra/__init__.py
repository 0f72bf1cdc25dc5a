"""
NP Spectra - Neumann-Poincare Spectra of Polyhedral Cones
Essential spectra, spectral curves and isolated eigenvalue branches
"""

__version__ = "1.0.0"

from .geometry import cone_from_edges, cone_from_dict, polyhedron_from_dict, tangent_cones
from .spectral_curves import sample_curve, sigma_max, essential_radius, region_membership
from .mellin_kernels import mellin_M3, mellin_M1, kernel_H, kernel_Hstar, kernel_S
from .nystrom import build_mesh, assemble, isolated_eigenvalues, calderon_residual
from .spectra import (cone_energy_spectrum, cone_weighted_spectrum,
                      polyhedron_essential_spectrum, plasmonic_map, sweep_branches)
