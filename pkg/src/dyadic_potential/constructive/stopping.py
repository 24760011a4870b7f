"""Stopping families: the highest nodes where a monitored quantity crosses a threshold."""

import numpy as np

from .. import _sweeps
from ..errors import GeometryError
from ..geometry import NodeFunction, StoppingFamily, TreeGeometry

COMPARISONS = (">", ">=")


def stopping_members(tree: TreeGeometry, values, threshold, comparison=">"):
    """Node ids of the maximal nodes where ``values`` passes the test, ascending."""
    if comparison not in COMPARISONS:
        raise GeometryError(f"comparison must be one of {COMPARISONS}, got {comparison!r}")
    values = np.asarray(values, dtype=float)
    hit = values > threshold if comparison == ">" else values >= threshold
    covered = _sweeps.down_any(hit.copy(), tree.depth)
    strict_above = np.zeros_like(hit)
    for k in range(1, tree.depth + 1):
        strict_above[_sweeps.level_slice(k)] = np.repeat(covered[_sweeps.level_slice(k - 1)], 2)
    return np.flatnonzero(hit & ~strict_above)


def build_stopping_family(h: NodeFunction, threshold: float, comparison: str = ">") -> StoppingFamily:
    """``S`` = maximal nodes ``b`` with ``h(b) > threshold`` (or ``>=``); may be empty."""
    if not isinstance(h.geometry, TreeGeometry):
        raise GeometryError("stopping families are built on a single tree")
    members = stopping_members(h.geometry, h.values, threshold, comparison)
    return StoppingFamily(h.geometry, tuple(int(a) for a in members))
