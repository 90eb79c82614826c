"""Model parameters of the one-dimensional (alpha, d, beta)-superprocess."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError, InputError

DENSITY = "density"
CONTINUITY = "continuity"
OPTIMALITY = "optimality"


@dataclass(frozen=True)
class ModelParams:
    """Motion index ``alpha``, branching index ``1 + beta``, growth ``a`` and
    branching coefficient ``b`` (``b = 0`` switches branching off, a
    control used to isolate the motion); branching mechanism ``v -> -a v + b v**(1+beta)``.
    """

    alpha: float
    beta: float
    a: float = 0.0
    b: float = 1.0
    d: int = 1

    def __post_init__(self):
        for name in ("alpha", "beta", "a", "b"):
            if not math.isfinite(getattr(self, name)):
                raise InputError(f"{name} must be finite")
        if not 0.0 < self.alpha <= 2.0:
            raise InputError("alpha must be in (0,2]")
        if not 0.0 < self.beta < 1.0:
            raise InputError("beta must be in (0,1)")
        if not self.b >= 0.0:
            raise InputError("b must be >= 0 (b = 0 is the pure-motion control)")
        if self.d != 1:
            raise InputError("only d = 1 is supported")

    @property
    def rho_const(self) -> float:
        """Jump-intensity constant ``b (1+beta) beta / Gamma(1-beta)``."""
        return self.b * (1.0 + self.beta) * self.beta / math.gamma(1.0 - self.beta)

    @property
    def eta_c(self) -> float:
        return self.alpha / (1.0 + self.beta) - 1.0

    @property
    def eta_bar_c(self) -> float:
        return min((1.0 + self.alpha) / (1.0 + self.beta) - 1.0, 1.0)

    @property
    def has_density(self) -> bool:
        return self.d < self.alpha / self.beta

    @property
    def continuity_regime(self) -> bool:
        return self.d == 1 and self.alpha > 1.0 + self.beta

    @property
    def optimality_regime(self) -> bool:
        return self.beta > (self.alpha - 1.0) / 2.0

    def require(self, *regimes: str) -> None:
        """Raise :class:`ConfigurationError` naming the first violated inequality."""
        for regime in regimes:
            if regime == DENSITY and not self.has_density:
                raise ConfigurationError(
                    f"requires d < α/β (got d={self.d}, α/β={self.alpha / self.beta:.6g})"
                )
            if regime == CONTINUITY and not self.continuity_regime:
                raise ConfigurationError(
                    f"requires α > 1+β (got α={self.alpha:g}, 1+β={1 + self.beta:g})"
                )
            if regime == OPTIMALITY and not self.optimality_regime:
                raise ConfigurationError(
                    f"requires β > (α-1)/2 (got β={self.beta:g}, (α-1)/2={(self.alpha - 1) / 2:g})"
                )
            if regime not in (DENSITY, CONTINUITY, OPTIMALITY):
                raise ValueError(f"unknown regime {regime!r}")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "a": self.a,
            "b": self.b,
            "d": self.d,
            "rho_const": self.rho_const,
            "eta_c": self.eta_c,
            "eta_bar_c": self.eta_bar_c,
        }
