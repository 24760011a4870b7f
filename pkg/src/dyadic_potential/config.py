"""Resolved run configuration shared by the CLI and the experiment drivers."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .constants import DEFAULT_RESTARTS, MAX_EXHAUSTIVE, SPECTRAL_TOLERANCE
from .constructive.equilibrium import EQUILIBRIUM_TOLERANCE
from .errors import GeometryError

IDENTITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Config:
    max_exhaustive: int = MAX_EXHAUSTIVE
    spectral_tolerance: float = SPECTRAL_TOLERANCE
    equilibrium_tolerance: float = EQUILIBRIUM_TOLERANCE
    identity_tolerance: float = IDENTITY_TOLERANCE
    restarts: int = DEFAULT_RESTARTS
    out_dir: str = "."
    seed: int = 0

    def __post_init__(self):
        for name in ("spectral_tolerance", "equilibrium_tolerance", "identity_tolerance"):
            if not getattr(self, name) > 0:
                raise GeometryError(f"{name} must be positive")
        if self.max_exhaustive < 1 or self.restarts < 1:
            raise GeometryError("max_exhaustive and restarts must be positive")
        if self.seed < 0:
            raise GeometryError("seed must be nonnegative")

    def to_dict(self):
        return asdict(self)
