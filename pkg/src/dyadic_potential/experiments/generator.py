"""Seeded random measures with an exact normalization."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from ..errors import GeneratorError, GeometryError, ParseError
from ..geometry import BoundaryMeasure, build_bitree, build_tree
from ..hardy import boundary_of, potential_array

LAWS = ("uniform", "exponential", "sparse")
NORMALIZATIONS = ("unit_mass", "potential_le_one_on_support", "potential_ge_one_on_support")
MAX_RESAMPLES = 100

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the splitmix64 mixer (Steele, Lea and Flood)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def sub_seed(seed: int, *path: int) -> int:
    """Derive a child seed by folding each key of ``path`` through splitmix64.

    The state starts at ``splitmix64(s)`` and each key ``k`` replaces it with
    ``splitmix64(state ^ k)``, so one integer seed fans out into independent,
    reproducible streams keyed by trial indices.  Keys enter unmixed so that
    ``(s, k)`` and ``(k, s)`` give different streams.
    """
    state = splitmix64(int(seed) & _MASK64)
    for key in path:
        state = splitmix64(state ^ (int(key) & _MASK64))
    return state


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for a random boundary measure; ``depth_y=None`` means a tree."""

    depth_x: int
    depth_y: int | None = None
    law: str = "exponential"
    p: float = 0.25
    pareto_alpha: float = 1.5
    normalization: str = "unit_mass"
    seed: int = 0

    def __post_init__(self):
        if self.law not in LAWS:
            raise GeometryError(f"unknown mass law {self.law!r}; expected one of {LAWS}")
        if self.normalization not in NORMALIZATIONS:
            raise GeometryError(
                f"unknown normalization {self.normalization!r}; expected one of {NORMALIZATIONS}"
            )
        if not 0 < self.p <= 1:
            raise GeometryError("sparse law needs p in (0, 1]")
        if not self.pareto_alpha > 0:
            raise GeometryError("pareto_alpha must be positive")
        if self.seed < 0:
            raise GeometryError("seed must be nonnegative")
        self.geometry()  # validates depths

    @property
    def is_bitree(self):
        return self.depth_y is not None

    def geometry(self):
        if self.depth_y is None:
            return build_tree(self.depth_x)
        return build_bitree(self.depth_x, self.depth_y)

    def with_seed(self, seed):
        return replace(self, seed=int(seed))

    def to_dict(self):
        d = asdict(self)
        if d["depth_y"] is None:
            del d["depth_y"]
        return d

    @classmethod
    def from_dict(cls, d, source=None):
        if not isinstance(d, dict):
            raise ParseError("generator spec must be a JSON object", source=source)
        known = {"depth_x", "depth_y", "law", "p", "pareto_alpha", "normalization", "seed"}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ParseError(f"unknown generator fields {unknown}", source=source)
        if "depth_x" not in d:
            raise ParseError("generator spec needs 'depth_x'", source=source)
        try:
            return cls(**d)
        except (GeometryError, TypeError) as err:
            raise ParseError(str(err), source=source) from None


def _draw(spec, rng, n):
    if spec.law == "uniform":
        return np.ones(n)
    if spec.law == "exponential":
        return rng.exponential(size=n)
    keep = rng.random(n) < spec.p
    # Pareto with minimum 1 (numpy's pareto is the Lomax form, shifted here).
    return np.where(keep, 1.0 + rng.pareto(spec.pareto_alpha, size=n), 0.0)


def normalize(masses, geometry, normalization):
    """Scale ``masses`` so the declared normalization holds."""
    if normalization == "unit_mass":
        return masses / masses.sum()
    V = boundary_of(geometry, potential_array(geometry, masses))[masses > 0]
    scale = V.max() if normalization == "potential_le_one_on_support" else V.min()
    return masses / scale


def gen_random_measure(spec: GeneratorSpec) -> BoundaryMeasure:
    """Draw a measure from ``spec``; a zero draw is redrawn from the next sub-seed.

    Attempt ``k`` uses ``numpy.random.default_rng(sub_seed(spec.seed, k))``.
    """
    geometry = spec.geometry()
    n = geometry.n_boundary
    for attempt in range(MAX_RESAMPLES):
        rng = np.random.default_rng(sub_seed(spec.seed, attempt))
        masses = _draw(spec, rng, n)
        if masses.any():
            return BoundaryMeasure(geometry, normalize(masses, geometry, spec.normalization))
    raise GeneratorError(
        f"{spec.law} law produced the zero measure {MAX_RESAMPLES} times (seed {spec.seed})"
    )
