"""Gradient-corrected indirect Coulomb energy bounds: constants, functionals and lattice checks."""

__version__ = "0.1.0"

from .density import DensityField, from_spec, grid_field, parse_cube
from .functionals import corr_exact, evaluate_bound, f_grad13_l2, f_grad_l1, f_rho43, verify_chain
from .kernel import chi, psi, psi_split
from .lattice import BravaisLattice, build_ws_cell

__all__ = [
    "BravaisLattice",
    "DensityField",
    "build_ws_cell",
    "chi",
    "corr_exact",
    "evaluate_bound",
    "f_grad13_l2",
    "f_grad_l1",
    "f_rho43",
    "from_spec",
    "grid_field",
    "parse_cube",
    "psi",
    "psi_split",
    "verify_chain",
]
