"""Runtime knobs: dense-enumeration cap, kernel backend, pruning thresholds."""

from __future__ import annotations

import os

DEFAULT_DENSE_CAP = 2**24
DEFAULT_PRUNE_TOL = 1e-12
DEFAULT_CONVOLVE_CAP = 10**6

_ENV_DENSE_CAP = "FSOS_DENSE_CAP"
_ENV_KERNELS = "FSOS_KERNELS"


def dense_cap() -> int:
    """Largest group size for which dense operations (FFT, brute force) run."""
    raw = os.environ.get(_ENV_DENSE_CAP)
    if raw is None:
        return DEFAULT_DENSE_CAP
    cap = int(raw)
    if cap < 1:
        raise ValueError(f"{_ENV_DENSE_CAP} must be positive, got {raw!r}")
    return cap


def kernel_backend() -> str:
    """Requested kernel backend: 'numba', 'numpy', or 'auto' (default)."""
    raw = os.environ.get(_ENV_KERNELS, "auto").strip().lower()
    if raw not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"{_ENV_KERNELS} must be 'numba' or 'numpy', got {raw!r}"
        )
    return raw
