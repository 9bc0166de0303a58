"""Ergodic averages, neutrality, thermodynamic scaling and the tiling gap."""

from .averages import (
    analytic_mean,
    domain_charge,
    ergodic_average,
    neutrality_estimate,
    replica_configurations,
    sites_in_domain,
)
from .gap import graf_schenker_gap, tile_memberships
from .models import (
    DomainSequence,
    ErgodicSeries,
    GapReport,
    NeutralityPoint,
    NeutralityReport,
    ScalingPoint,
    ScalingSeries,
    log_slope,
    richardson_limit,
)
from .thermo import expected_fluctuation_slope, proxy_energy_terms, thermo_scan

__all__ = [
    "DomainSequence",
    "ErgodicSeries",
    "GapReport",
    "NeutralityPoint",
    "NeutralityReport",
    "ScalingPoint",
    "ScalingSeries",
    "analytic_mean",
    "domain_charge",
    "ergodic_average",
    "expected_fluctuation_slope",
    "graf_schenker_gap",
    "log_slope",
    "neutrality_estimate",
    "proxy_energy_terms",
    "replica_configurations",
    "richardson_limit",
    "sites_in_domain",
    "thermo_scan",
    "tile_memberships",
]
