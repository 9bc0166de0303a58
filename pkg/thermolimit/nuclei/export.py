"""Serialization of sampled configurations.

The descriptor (model, law parameters, window, margin, seed, cutoff) is
written as YAML; nuclei go to CSV with one row per nucleus.
"""

from pathlib import Path

import yaml

from ..tables import Column, Table
from .models import ConfigurationDescriptor, NuclearConfiguration

NUCLEI_COLUMNS = [
    Column("x", "length"),
    Column("y", "length"),
    Column("z", "length"),
    Column("charge", "e"),
    Column("site_i"),
    Column("site_j"),
    Column("site_k"),
]


def nuclei_table(config: NuclearConfiguration, name: str = "nuclei") -> Table:
    """One row per nucleus, in canonical (site-lexicographic) order."""
    table = Table(name, list(NUCLEI_COLUMNS))
    for pos, q, site in zip(config.positions, config.charges, config.sites):
        table.add(pos[0], pos[1], pos[2], q, site[0], site[1], site[2])
    return table


def descriptor_to_yaml(config: NuclearConfiguration) -> str:
    return yaml.safe_dump(config.descriptor.model_dump(mode="json"), sort_keys=True)


def descriptor_from_yaml(text: str) -> ConfigurationDescriptor:
    return ConfigurationDescriptor.model_validate(yaml.safe_load(text))


def write_descriptor(config: NuclearConfiguration, path: Path) -> None:
    Path(path).write_text(descriptor_to_yaml(config), encoding="utf-8")
