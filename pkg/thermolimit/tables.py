"""Plot-ready CSV tables with unit-bearing headers.

Every CSV the toolkit writes goes through :class:`Table`. Floats are
written with ``repr`` (shortest round-trip form) and lines end in ``\\n``,
so identical values always produce identical bytes.

Key classes:
    Column, Table
"""

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Sequence

import numpy as np


@dataclass(frozen=True)
class Column:
    """A CSV column; ``unit`` is rendered as ``name [unit]``."""
    name: str
    unit: str = ""

    @property
    def header(self) -> str:
        return f"{self.name} [{self.unit}]" if self.unit else self.name


def format_cell(value: Any) -> str:
    """Deterministic text for one CSV cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


@dataclass
class Table:
    """Named table of rows under typed columns."""
    name: str
    columns: List[Column]
    rows: List[Sequence[Any]] = field(default_factory=list)

    def add(self, *values: Any) -> None:
        if len(values) != len(self.columns):
            raise ValueError(
                f"table {self.name}: expected {len(self.columns)} values, got {len(values)}"
            )
        self.rows.append(values)

    @property
    def headers(self) -> List[str]:
        return [c.header for c in self.columns]

    def column(self, name: str) -> List[Any]:
        idx = [c.name for c in self.columns].index(name)
        return [row[idx] for row in self.rows]

    def write_csv(self, path: Path) -> str:
        """Write the table and return the SHA-256 of the written bytes."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(self.headers)
            for row in self.rows:
                writer.writerow([format_cell(v) for v in row])
        return hashlib.sha256(path.read_bytes()).hexdigest()
