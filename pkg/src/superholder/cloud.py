"""Atomic approximation of a finite measure on the line."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class ParticleCloud:
    """Equal-mass atoms: ``count * atom_mass`` is the total mass."""

    time: float
    positions: np.ndarray
    atom_mass: float

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=float).ravel()
        if not np.all(np.isfinite(pos)):
            raise InputError("positions must be finite")
        if not (self.atom_mass > 0.0 and math.isfinite(self.atom_mass)):
            raise InputError("atom_mass must be > 0")
        if self.time < 0.0:
            raise InputError("time must be >= 0")
        object.__setattr__(self, "positions", pos)

    @classmethod
    def point_mass(cls, x: float = 0.0, mass: float = 1.0, scale_n: int = 1000, time: float = 0.0):
        """``mass * delta_x`` carried by ``round(mass * scale_n)`` atoms of mass ``1/scale_n``."""
        count = int(round(mass * scale_n))
        if count < 1:
            raise InputError("mass * scale_n must be >= 1")
        return cls(time, np.full(count, float(x)), 1.0 / scale_n)

    @classmethod
    def from_density_samples(cls, positions, scale_n: int, time: float = 0.0):
        return cls(time, np.asarray(positions, dtype=float), 1.0 / scale_n)

    @property
    def count(self) -> int:
        return int(self.positions.size)

    @property
    def masses(self) -> float:
        return self.atom_mass

    @property
    def total_mass(self) -> float:
        return self.count * self.atom_mass

    @property
    def scale_n(self) -> int:
        return int(round(1.0 / self.atom_mass))

    def pairing(self, phi) -> float:
        """``<X, phi>`` for a vectorised test function ``phi``."""
        if self.count == 0:
            return 0.0
        return float(np.sum(phi(self.positions)) * self.atom_mass)
