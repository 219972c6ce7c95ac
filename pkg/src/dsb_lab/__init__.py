"""Dependent Dirichlet process simulation and property diagnostics."""

__version__ = "0.1.0"

from .index_space import Box, LocationSet, build_grid, distance
from .latent_field import CovKernelSpec, LatentField, cov_matrix, sample_field, standard_cdf
from .stick_process import StickSpec, TruncatedWeights, beta_quantile, expected_tail, gauss_to_stick, stick_weights
from .atom_process import AtomField, AtomSpec, Marginal, sample_atom_field, sample_iid_atoms, wrap_to_circle
from .ddp_core import (
    DiscreteMeasure,
    MeasureField,
    ProcessSpec,
    TestFunctionPanel,
    assemble_path,
    integrate,
    interpolate_measure_field,
    sample_path,
    tv_distance,
    weak_panel_distance,
)
from .mixture import (
    DensityGrid,
    MixtureKernelSpec,
    check_decay_condition,
    hellinger,
    kl_divergence,
    l1_distance,
    mixture_density,
    sup_distance,
)
from .diagnostics import DiagnosticsReport, ProbeConfig

__all__ = [
    "AtomField", "AtomSpec", "Box", "CovKernelSpec", "DensityGrid", "DiagnosticsReport", "DiscreteMeasure",
    "LatentField", "LocationSet", "Marginal", "MeasureField", "MixtureKernelSpec", "ProbeConfig", "ProcessSpec",
    "StickSpec", "TestFunctionPanel", "TruncatedWeights", "assemble_path", "beta_quantile", "build_grid",
    "check_decay_condition", "cov_matrix", "distance", "expected_tail", "gauss_to_stick", "hellinger",
    "integrate", "interpolate_measure_field", "kl_divergence", "l1_distance", "mixture_density", "sample_atom_field",
    "sample_field", "sample_iid_atoms", "sample_path", "standard_cdf", "stick_weights", "sup_distance",
    "tv_distance", "weak_panel_distance", "wrap_to_circle",
]
