"""Level sweeps along one tree axis of a heap-ordered array.

Level ``k`` of a depth-``N`` tree occupies the contiguous slice
``[2**k - 1, 2**(k+1) - 1)``, and the children of the ``j``-th node of level
``k`` are entries ``2j, 2j+1`` of level ``k+1``.  All helpers work in place on
``arr`` along ``axis`` and return it.
"""

import numpy as np


def level_slice(k):
    return slice((1 << k) - 1, (1 << (k + 1)) - 1)


def down_accumulate(arr, depth, axis=0):
    """Ancestor sums: value(node) += value(parent), top-down."""
    a = np.moveaxis(arr, axis, 0)
    for k in range(1, depth + 1):
        a[level_slice(k)] += np.repeat(a[level_slice(k - 1)], 2, axis=0)
    return arr


def up_accumulate(arr, depth, axis=0):
    """Descendant sums: value(node) += value(child1) + value(child2), bottom-up."""
    a = np.moveaxis(arr, axis, 0)
    for k in range(depth - 1, -1, -1):
        child = a[level_slice(k + 1)]
        a[level_slice(k)] += child.reshape((1 << k, 2) + child.shape[1:]).sum(axis=1)
    return arr


def up_all(mask, depth, axis=0):
    """Interior node is True iff both children are True (boundary values kept)."""
    a = np.moveaxis(mask, axis, 0)
    for k in range(depth - 1, -1, -1):
        child = a[level_slice(k + 1)]
        a[level_slice(k)] = child.reshape((1 << k, 2) + child.shape[1:]).all(axis=1)
    return mask


def down_any(mask, depth, axis=0):
    """Node becomes True if its parent is True (propagates membership downward)."""
    a = np.moveaxis(mask, axis, 0)
    for k in range(1, depth + 1):
        a[level_slice(k)] |= np.repeat(a[level_slice(k - 1)], 2, axis=0)
    return mask


def up_any(mask, depth, axis=0):
    """Node becomes True if either child is True."""
    a = np.moveaxis(mask, axis, 0)
    for k in range(depth - 1, -1, -1):
        child = a[level_slice(k + 1)]
        a[level_slice(k)] |= child.reshape((1 << k, 2) + child.shape[1:]).any(axis=1)
    return mask
