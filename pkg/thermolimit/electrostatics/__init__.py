"""Pair energies, screening clouds and the trial-state energy."""

from .models import (
    DipoleAudit,
    EnergyBreakdown,
    PointCharge,
    ScreeningCloud,
    TrialEnergyReport,
    YukawaAudit,
)
from .pair import (
    cloud_interaction,
    coulomb_energy,
    dipole_bound_audit,
    dipole_interaction,
    random_charge_system,
    yukawa_comparison_deficit,
    yukawa_deficit_audit,
    yukawa_energy,
)
from .screening import (
    build_screening,
    collar_pair_sums,
    domain_nuclei,
    lieb_yau_term,
    trial_energy,
)

__all__ = [
    "DipoleAudit",
    "EnergyBreakdown",
    "PointCharge",
    "ScreeningCloud",
    "TrialEnergyReport",
    "YukawaAudit",
    "build_screening",
    "cloud_interaction",
    "collar_pair_sums",
    "coulomb_energy",
    "dipole_bound_audit",
    "dipole_interaction",
    "domain_nuclei",
    "lieb_yau_term",
    "random_charge_system",
    "trial_energy",
    "yukawa_comparison_deficit",
    "yukawa_deficit_audit",
    "yukawa_energy",
]
