"""Backend dispatch for the sparse hot kernels.

The accelerated path uses numba @njit loops; the fallback is vectorized
numpy.  Selection: FSOS_KERNELS=numba|numpy, default 'auto' (numba when
importable).  Object-dtype keys (groups beyond int64 packing) always take
the numpy path.  `benchmarks/bench_kernels.py` compares the two.
"""

from __future__ import annotations

import warnings

import numpy as np

from . import _kernels_numpy
from .config import kernel_backend

_active_name: str | None = None
_active_module = None


def _resolve(name: str):
    if name == "numpy":
        return "numpy", _kernels_numpy
    try:
        from . import _kernels_numba

        return "numba", _kernels_numba
    except ImportError:
        if name == "numba":
            raise
        warnings.warn("numba unavailable; falling back to numpy kernels")
        return "numpy", _kernels_numpy


def active_backend() -> str:
    """Name of the backend in use ('numba' or 'numpy')."""
    global _active_name, _active_module
    if _active_module is None:
        _active_name, _active_module = _resolve(kernel_backend())
    return _active_name


def set_backend(name: str | None) -> str:
    """Force a backend ('numba'/'numpy') or reset to env selection (None)."""
    global _active_name, _active_module
    if name is None:
        _active_name = _active_module = None
        return active_backend()
    _active_name, _active_module = _resolve(name)
    return _active_name


def _impl(keys) -> object:
    if _active_module is None:
        active_backend()
    if keys.dtype == object:
        return _kernels_numpy
    return _active_module


def pair_combine(keys_a, keys_b, orders, weights, two_group: bool):
    return _impl(keys_a).pair_combine(keys_a, keys_b, orders, weights, two_group)


def sum_by_key(keys, vals):
    return _impl(keys).sum_by_key(keys, vals)


def gather_groups(flat, positions, offsets):
    if flat.dtype == object:
        return _kernels_numpy.gather_groups(flat, positions, offsets)
    if _active_module is None:
        active_backend()
    return _active_module.gather_groups(flat, positions, offsets)


def convolve(spec, keys_a, vals_a, keys_b, vals_b, cap: int | None = None,
             block: int = 512):
    """Sparse convolution on the dual group: sums vals_a[i]*vals_b[j] over
    pairs with combined key a_i*b_j.  Returns (sorted keys, values).

    Blocked over rows of `a` so the intermediate product list stays below
    roughly block*len(b) entries.  `cap` bounds the output term count.
    """
    from .errors import SparsityCapExceeded

    orders = np.asarray(spec.orders, dtype=np.int64)
    weights_arr = np.asarray(spec.weights, dtype=object if not spec.packable else np.int64)
    out_keys = np.empty(0, dtype=spec.key_dtype)
    out_vals = np.empty(0, dtype=np.complex128)
    for start in range(0, keys_a.shape[0], block):
        ka = keys_a[start : start + block]
        va = vals_a[start : start + block]
        combined = pair_combine(ka, keys_b, orders, weights_arr, spec.is_two_group)
        prods = (va[:, None] * vals_b[None, :]).reshape(-1)
        bk, bv = sum_by_key(combined, prods)
        out_keys = np.concatenate([out_keys, bk])
        out_vals = np.concatenate([out_vals, bv])
        out_keys, out_vals = sum_by_key(out_keys, out_vals)
        if cap is not None and out_keys.shape[0] > cap:
            raise SparsityCapExceeded(
                f"convolution exceeded {cap} terms; lower the polynomial "
                f"degree or raise the cap"
            )
    return out_keys, out_vals
