"""Double-loop reference sums, written independently of the vectorized code."""

import math
from typing import Sequence

import numpy as np

from ..exceptions import ElectrostaticsError


def coulomb_energy_reference(positions: Sequence, charges: Sequence[float]) -> float:
    total = 0.0
    n = len(charges)
    for i in range(n):
        for j in range(i + 1, n):
            r = math.dist(positions[i], positions[j])
            if r == 0.0:
                raise ElectrostaticsError("coincident charge positions")
            total += charges[i] * charges[j] / r
    return total


def yukawa_energy_reference(positions: Sequence, charges: Sequence[float],
                            mass: float = 1.0) -> float:
    total = 0.0
    n = len(charges)
    for i in range(n):
        for j in range(i + 1, n):
            r = math.dist(positions[i], positions[j])
            total += charges[i] * charges[j] * math.exp(-mass * r) / r
    return total


def boundary_sum_reference(positions: np.ndarray, charges: np.ndarray) -> float:
    """Σ over ordered pairs i ≠ j of q_i q_j / (r (1 + r²))."""
    total = 0.0
    n = len(charges)
    for i in range(n):
        for j in range(n):
            if i != j:
                r = math.dist(positions[i], positions[j])
                total += charges[i] * charges[j] / (r * (1.0 + r * r))
    return total
