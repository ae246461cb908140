"""Numba @njit versions of the sparse hot kernels (int64 keys only)."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def pair_combine_xor(keys_a, keys_b):
    na = keys_a.shape[0]
    nb = keys_b.shape[0]
    out = np.empty(na * nb, dtype=np.int64)
    for i in range(na):
        ka = keys_a[i]
        base = i * nb
        for j in range(nb):
            out[base + j] = ka ^ keys_b[j]
    return out


@njit(cache=True)
def pair_combine_mixed(keys_a, keys_b, orders, weights):
    na = keys_a.shape[0]
    nb = keys_b.shape[0]
    naxes = orders.shape[0]
    out = np.empty(na * nb, dtype=np.int64)
    for i in range(na):
        ka = keys_a[i]
        base = i * nb
        for j in range(nb):
            kb = keys_b[j]
            total = np.int64(0)
            for t in range(naxes):
                w = weights[t]
                d = orders[t]
                total += (((ka // w) + (kb // w)) % d) * w
            out[base + j] = total
    return out


def pair_combine(keys_a, keys_b, orders, weights, two_group: bool):
    if two_group:
        return pair_combine_xor(keys_a, keys_b)
    return pair_combine_mixed(
        keys_a,
        keys_b,
        np.asarray(orders, dtype=np.int64),
        np.asarray(weights, dtype=np.int64),
    )


@njit(cache=True)
def _sum_sorted(skeys, svals):
    n = skeys.shape[0]
    out_keys = np.empty(n, dtype=skeys.dtype)
    out_vals = np.empty(n, dtype=svals.dtype)
    m = -1
    for i in range(n):
        k = skeys[i]
        if m >= 0 and k == out_keys[m]:
            out_vals[m] += svals[i]
        else:
            m += 1
            out_keys[m] = k
            out_vals[m] = svals[i]
    return out_keys[: m + 1].copy(), out_vals[: m + 1].copy()


def sum_by_key(keys, vals):
    # argsort stays outside @njit: numba's mergesort on int64 is no faster.
    order = np.argsort(keys, kind="mergesort")
    if keys.shape[0] == 0:
        return keys, vals
    return _sum_sorted(keys[order], vals[order])


@njit(cache=True)
def gather_groups(flat, positions, offsets):
    ng = offsets.shape[0] - 1
    out = np.zeros(ng, dtype=flat.dtype)
    for g in range(ng):
        for p in range(offsets[g], offsets[g + 1]):
            out[g] += flat[positions[p]]
    return out
