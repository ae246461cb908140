"""Finite abelian groups Z_{d1} x ... x Z_{dn}: elements, characters, FFT.

Elements and characters are indexed the same way: a tuple of residues is
packed into a single mixed-radix integer with coordinate 1 fastest-varying,

    index(g) = g1 + d1*(g2 + d2*(g3 + ...)).

This enumeration order is frozen; dense tables, FFT output and the JSON
interchange formats all rely on it (see docs/formats.md).  Packed keys are
int64 when the group order fits, and Python integers (object arrays) for
very large groups, where only sparse operations make sense anyway.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .config import dense_cap
from .errors import DenseCapExceeded, DimensionMismatch

_PACKABLE_LIMIT = 2**62


@dataclass(frozen=True)
class GroupSpec:
    """The group Z_{d1} x ... x Z_{dn}, given by its cyclic orders."""

    orders: tuple[int, ...]

    def __post_init__(self):
        if len(self.orders) == 0:
            raise ValueError("group must have at least one factor")
        if any(int(d) < 2 for d in self.orders):
            raise ValueError(f"all cyclic orders must be >= 2, got {self.orders}")
        object.__setattr__(self, "orders", tuple(int(d) for d in self.orders))

    @property
    def ndim(self) -> int:
        return len(self.orders)

    @cached_property
    def size(self) -> int:
        return math.prod(self.orders)

    @cached_property
    def weights(self) -> tuple[int, ...]:
        """Mixed-radix place values: weights[j] = d1*...*d_{j-1}."""
        w, acc = [], 1
        for d in self.orders:
            w.append(acc)
            acc *= d
        return tuple(w)

    @cached_property
    def packable(self) -> bool:
        return self.size <= _PACKABLE_LIMIT

    @cached_property
    def is_two_group(self) -> bool:
        return all(d == 2 for d in self.orders)

    @property
    def key_dtype(self):
        return np.int64 if self.packable else object

    def check_dense(self, what: str = "dense operation") -> None:
        cap = dense_cap()
        if self.size > cap:
            raise DenseCapExceeded(
                f"{what} needs |G| = {self.size} points, above the cap {cap} "
                f"(override with FSOS_DENSE_CAP)"
            )

    def __str__(self) -> str:
        return "x".join(f"Z{d}" for d in self.orders)


@dataclass(frozen=True)
class GroupElement:
    """A point of G as a tuple of residues, coords[j] in [0, d_{j+1})."""

    coords: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))


@dataclass(frozen=True)
class DualIndex:
    """A character label: exponents exps[j] in [0, d_{j+1})."""

    exps: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "exps", tuple(int(e) for e in self.exps))

    @property
    def degree(self) -> int:
        return sum(self.exps)


def _check_tuple(spec: GroupSpec, values: tuple[int, ...], what: str) -> None:
    if len(values) != spec.ndim:
        raise DimensionMismatch(
            f"{what} has {len(values)} coordinates, group {spec} has {spec.ndim}"
        )
    for v, d in zip(values, spec.orders):
        if not 0 <= v < d:
            raise DimensionMismatch(f"{what} coordinate {v} out of range [0,{d})")


def validate_element(spec: GroupSpec, g: GroupElement) -> None:
    _check_tuple(spec, g.coords, "element")


def validate_dual(spec: GroupSpec, a: DualIndex) -> None:
    _check_tuple(spec, a.exps, "dual index")


# -- scalar operations ------------------------------------------------------


def char_eval(spec: GroupSpec, alpha: DualIndex, g: GroupElement) -> complex:
    """Evaluate the character chi_alpha at g: prod_j exp(2*pi*i*a_j*g_j/d_j)."""
    validate_dual(spec, alpha)
    validate_element(spec, g)
    phase = sum(a * c / d for a, c, d in zip(alpha.exps, g.coords, spec.orders))
    return complex(np.exp(2j * np.pi * phase))


def dual_combine(spec: GroupSpec, a: DualIndex, b: DualIndex) -> DualIndex:
    """Product of characters: componentwise addition of exponents mod d_j."""
    validate_dual(spec, a)
    validate_dual(spec, b)
    return DualIndex(tuple((x + y) % d for x, y, d in zip(a.exps, b.exps, spec.orders)))


def dual_inverse(spec: GroupSpec, a: DualIndex) -> DualIndex:
    """Inverse character: componentwise negation mod d_j."""
    validate_dual(spec, a)
    return DualIndex(tuple((-x) % d for x, d in zip(a.exps, spec.orders)))


def group_combine(spec: GroupSpec, g: GroupElement, h: GroupElement) -> GroupElement:
    validate_element(spec, g)
    validate_element(spec, h)
    return GroupElement(
        tuple((x + y) % d for x, y, d in zip(g.coords, h.coords, spec.orders))
    )


# -- packed-key codec -------------------------------------------------------
#
# All sparse machinery works on packed keys.  The same packing serves both G
# and its dual (they are indexed identically), so `encode_exps` etc. apply to
# element coordinate rows as well.


def encode_exps(spec: GroupSpec, exps: np.ndarray):
    """Pack rows of exponents (m, n) into mixed-radix keys (m,)."""
    exps = np.asarray(exps)
    if exps.ndim == 1:
        exps = exps[None, :]
    if exps.shape[1] != spec.ndim:
        raise DimensionMismatch(
            f"exponent rows have {exps.shape[1]} columns, expected {spec.ndim}"
        )
    if spec.packable:
        w = np.asarray(spec.weights, dtype=np.int64)
        return exps.astype(np.int64) @ w
    w = np.asarray(spec.weights, dtype=object)
    return (exps.astype(object) * w).sum(axis=1)


def decode_keys(spec: GroupSpec, keys: np.ndarray) -> np.ndarray:
    """Unpack keys (m,) into exponent rows (m, n) of int64."""
    keys = np.asarray(keys)
    out = np.empty((keys.shape[0], spec.ndim), dtype=np.int64)
    for j, (d, w) in enumerate(zip(spec.orders, spec.weights)):
        out[:, j] = (keys // w) % d
    return out


def combine_keys(spec: GroupSpec, a, b):
    """Keys of the componentwise sum; supports broadcasting."""
    a = np.asarray(a)
    b = np.asarray(b)
    if spec.is_two_group:
        return a ^ b
    total = np.zeros(np.broadcast(a, b).shape, dtype=spec.key_dtype)
    for d, w in zip(spec.orders, spec.weights):
        total += (((a // w) + (b // w)) % d) * w
    return total


def invert_keys(spec: GroupSpec, keys):
    """Keys of the componentwise negation."""
    keys = np.asarray(keys)
    if spec.is_two_group:
        return keys.copy()
    total = np.zeros(keys.shape, dtype=spec.key_dtype)
    for d, w in zip(spec.orders, spec.weights):
        total += ((d - (keys // w) % d) % d) * w
    return total


def degree_of_keys(spec: GroupSpec, keys) -> np.ndarray:
    """Total degree sum_j alpha_j of each key."""
    keys = np.asarray(keys)
    total = np.zeros(keys.shape, dtype=np.int64)
    for d, w in zip(spec.orders, spec.weights):
        total += ((keys // w) % d).astype(np.int64)
    return total


def key_of_dual(spec: GroupSpec, a: DualIndex):
    validate_dual(spec, a)
    acc = 0
    for e, w in zip(a.exps, spec.weights):
        acc += e * w
    return acc if not spec.packable else np.int64(acc)


def dual_of_key(spec: GroupSpec, key) -> DualIndex:
    exps = []
    k = int(key)
    for d in spec.orders:
        k, r = divmod(k, d)
        exps.append(r)
    return DualIndex(tuple(exps))


def element_of_key(spec: GroupSpec, key) -> GroupElement:
    return GroupElement(dual_of_key(spec, key).exps)


def key_of_element(spec: GroupSpec, g: GroupElement):
    validate_element(spec, g)
    acc = 0
    for c, w in zip(g.coords, spec.weights):
        acc += c * w
    return acc if not spec.packable else np.int64(acc)


def char_values_at(spec: GroupSpec, keys, g: GroupElement) -> np.ndarray:
    """chi_alpha(g) for every packed dual key alpha in `keys`."""
    validate_element(spec, g)
    keys = np.asarray(keys)
    phase = np.zeros(keys.shape, dtype=np.float64)
    for d, w, c in zip(spec.orders, spec.weights, g.coords):
        phase += ((keys // w) % d).astype(np.float64) * (c / d)
    return np.exp(2j * np.pi * phase)


# -- dense transforms -------------------------------------------------------


def fft(spec: GroupSpec, table: np.ndarray) -> np.ndarray:
    """Fourier coefficients of a dense value table.

    Forward convention carries the 1/|G| weight:
    coeff[alpha] = (1/|G|) * sum_g table[g] * conj(chi_alpha(g)).
    Input and output are flat vectors in the frozen enumeration order.
    """
    spec.check_dense("fft")
    table = np.asarray(table, dtype=np.complex128)
    if table.shape != (spec.size,):
        raise DimensionMismatch(
            f"table has length {table.shape}, expected ({spec.size},)"
        )
    arr = table.reshape(spec.orders[::-1])
    return (np.fft.fftn(arr) / spec.size).reshape(-1)


def ifft(spec: GroupSpec, coeffs: np.ndarray) -> np.ndarray:
    """Inverse transform: table[g] = sum_alpha coeffs[alpha] * chi_alpha(g)."""
    spec.check_dense("ifft")
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if coeffs.shape != (spec.size,):
        raise DimensionMismatch(
            f"coefficient vector has length {coeffs.shape}, expected ({spec.size},)"
        )
    arr = coeffs.reshape(spec.orders[::-1])
    return (np.fft.ifftn(arr) * spec.size).reshape(-1)
