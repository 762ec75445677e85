"""Simulation and verification toolkit for coupled fluctuating-lattice systems.

The package integrates ensembles of multi-species interacting diffusions on a
periodic one-dimensional lattice, audits the structural assumptions of the
interaction potential, computes the drift tensors that govern the
hydrodynamic rescaling, and checks the rescaled fluctuation fields against
their limiting spectral Burgers dynamics.
"""

__version__ = "0.1.0"

from .config import ConfigError, load_config
from .gibbs import GibbsError, SiteMeasure, partition_function, sample_sites
from .lattice import (
    LatticeBlowupError,
    LatticeSystem,
    RunPlan,
    apply_generator,
    run,
    stability_cap,
)
from .potentials import (
    CubicQuarticPotential,
    DiagonalPotential,
    FPUPotential,
    Potential,
    QuadraticPotential,
    TensorPolynomialPotential,
    TodaPotential,
    check_assumptions,
    eval_derivatives,
    make_potential,
    rescale,
    two_species_family,
)
from .sbe import SbeBlowupError, SpectralSBE
from .seeds import rng_stream, seed_stream
from .tensors import (
    check_algebraic_constraint,
    check_frame_conditions,
    gamma_delta,
    lambda_matrix,
    moving_frame,
    xi_matrix,
)
from .testfunctions import TrigPolynomial, by_name, cosine, sine, standard_library

__all__ = [
    "ConfigError",
    "CubicQuarticPotential",
    "DiagonalPotential",
    "FPUPotential",
    "GibbsError",
    "LatticeBlowupError",
    "LatticeSystem",
    "Potential",
    "QuadraticPotential",
    "RunPlan",
    "SbeBlowupError",
    "SiteMeasure",
    "SpectralSBE",
    "TensorPolynomialPotential",
    "TodaPotential",
    "TrigPolynomial",
    "apply_generator",
    "by_name",
    "check_algebraic_constraint",
    "check_assumptions",
    "check_frame_conditions",
    "cosine",
    "eval_derivatives",
    "gamma_delta",
    "lambda_matrix",
    "load_config",
    "make_potential",
    "moving_frame",
    "partition_function",
    "rescale",
    "rng_stream",
    "run",
    "sample_sites",
    "seed_stream",
    "sine",
    "stability_cap",
    "standard_library",
    "two_species_family",
    "xi_matrix",
]
