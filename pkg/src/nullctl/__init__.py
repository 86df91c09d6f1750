"""Fourier-multiplier semigroups on periodic grids: observability constants,
spectral inequalities on thick sets and dual-method null controls."""
from .spectral import Field, Grid, dft, idft, lp_norm
from .symbols import EllipticSymbol, NotElliptic, adjoint_symbol, certify_ellipticity, heat_symbol
from .semigroup import Semigroup, apply_semigroup, estimate_growth_bound, heat_kernel, verify_kernel_bound
from .projector import BandProjector, CutoffProfile, measure_dissipation_general, measure_dissipation_laplacian
from .thickness import ThickSet, generate_thick_set, measure_ls_constant, measure_thickness
from .observability import (compute_abstract_cobs, compute_parabolic_cobs, measure_observability_ratio,
                            verify_dual_norm_identity, verify_iteration_inequality)
from .control import ControlSolution, duhamel_evolve, measure_control_cost, synthesize_control_hum

__version__ = "0.1.0"

__all__ = [
    "Field",
    "Grid",
    "dft",
    "idft",
    "lp_norm",
    "EllipticSymbol",
    "NotElliptic",
    "adjoint_symbol",
    "certify_ellipticity",
    "heat_symbol",
    "Semigroup",
    "apply_semigroup",
    "estimate_growth_bound",
    "heat_kernel",
    "verify_kernel_bound",
    "BandProjector",
    "CutoffProfile",
    "measure_dissipation_general",
    "measure_dissipation_laplacian",
    "ThickSet",
    "generate_thick_set",
    "measure_ls_constant",
    "measure_thickness",
    "compute_abstract_cobs",
    "compute_parabolic_cobs",
    "measure_observability_ratio",
    "verify_dual_norm_identity",
    "verify_iteration_inequality",
    "ControlSolution",
    "duhamel_evolve",
    "measure_control_cost",
    "synthesize_control_hum",
]
