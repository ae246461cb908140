"""Pure-numpy implementations of the sparse hot kernels.

These are the reference/fallback paths; `fsos._kernels_numba` mirrors them
with @njit loops.  Both operate on packed mixed-radix keys.  The numpy
versions also serve object-dtype keys (groups too large for int64 packing).
"""

from __future__ import annotations

import numpy as np


def pair_combine(keys_a, keys_b, orders, weights, two_group: bool):
    """Combined keys of all pairs, a-major: out[i*nb + j] = a_i * b_j."""
    a = keys_a[:, None]
    b = keys_b[None, :]
    if two_group:
        return (a ^ b).reshape(-1)
    dtype = keys_a.dtype if keys_a.dtype == object else np.int64
    total = np.zeros((keys_a.shape[0], keys_b.shape[0]), dtype=dtype)
    for d, w in zip(orders, weights):
        total += (((a // w) + (b // w)) % d) * w
    return total.reshape(-1)


def sum_by_key(keys, vals):
    """Sort keys and sum values of duplicates; returns (unique_keys, sums)."""
    order = np.argsort(keys, kind="mergesort")
    skeys = keys[order]
    svals = vals[order]
    if skeys.shape[0] == 0:
        return skeys, svals
    boundary = np.empty(skeys.shape[0], dtype=bool)
    boundary[0] = True
    boundary[1:] = skeys[1:] != skeys[:-1]
    starts = np.flatnonzero(boundary)
    return skeys[starts], np.add.reduceat(svals, starts)


def gather_groups(flat, positions, offsets):
    """Per-group sums of flat[positions[offsets[g]:offsets[g+1]]]."""
    if offsets.shape[0] <= 1:
        return np.zeros(0, dtype=flat.dtype)
    return np.add.reduceat(flat[positions], offsets[:-1])
