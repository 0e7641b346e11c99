"""Boundary-integral toolkit for the free three-dimensional Dirac operator."""

__version__ = "0.1.0"

from diracbie.algebra import (
    ALPHA,
    BETA,
    DiracMatrices,
    TransmissionParams,
    alpha_dot,
    mit_matrix,
    mit_projectors,
    p_tau,
    r_tau,
    shell_block_matrix,
)
from diracbie.calderon import CalderonSuite, identity_residuals, make_anticommutator, make_projectors, make_star
from diracbie.kernels import DiracParams, anticommutator_kernel_split, fourier_symbol, phi, psi
from diracbie.layerpot import (
    BoundaryOperator,
    ExtrapolationError,
    LayerPotential,
    assemble_cs,
    assemble_one_sided,
    eval_layer_potential,
    one_sided_trace,
    reproducing_residual,
)
from diracbie.models import (
    ShellSystem,
    critical_witness,
    mit_boundary_form,
    mit_bootstrap_residual,
    rough_spectrum,
    shell_system_conditioning,
    shell_transmission_residual,
    transfer,
)
from diracbie.surface import (
    Ellipsoid,
    HarmonicSpectrum,
    Sphere,
    SpinorTrace,
    SurfaceGrid,
    Torus,
    build_surface,
    refine,
    sh_analyze,
    sh_synthesize,
    sobolev_norm,
)
