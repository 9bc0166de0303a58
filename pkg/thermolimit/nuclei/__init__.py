"""Stationary random nuclear configurations (perturbed lattices, Poisson fields)."""

from .export import descriptor_from_yaml, descriptor_to_yaml, nuclei_table, write_descriptor
from .models import (
    Box,
    ChargeLaw,
    CompactInCell,
    ConfigurationDescriptor,
    ConstantCharge,
    DisplacementLaw,
    GaussianIsotropic,
    LatticeSpec,
    Mixture,
    MixtureComponent,
    ModelSpec,
    NuclearConfiguration,
    PointMass,
    UniformBall,
    UniformIntervalCharge,
    VacancyCharge,
)
from .sampler import poisson_configuration, realize, sample_configuration, shift_configuration

__all__ = [
    "Box",
    "ChargeLaw",
    "CompactInCell",
    "ConfigurationDescriptor",
    "ConstantCharge",
    "DisplacementLaw",
    "GaussianIsotropic",
    "LatticeSpec",
    "Mixture",
    "MixtureComponent",
    "ModelSpec",
    "NuclearConfiguration",
    "PointMass",
    "UniformBall",
    "UniformIntervalCharge",
    "VacancyCharge",
    "descriptor_from_yaml",
    "descriptor_to_yaml",
    "nuclei_table",
    "poisson_configuration",
    "realize",
    "sample_configuration",
    "shift_configuration",
    "write_descriptor",
]
