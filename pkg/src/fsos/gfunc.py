"""Sparse Fourier-side representation of functions on a finite abelian group.

A GroupFunction stores only nonzero coefficients, keyed by packed dual
indices.  All algebra happens on the coefficient side; dense tables are
materialized only under the configured group-size cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import abelian, kernels
from .abelian import DualIndex, GroupElement, GroupSpec
from .config import DEFAULT_CONVOLVE_CAP, DEFAULT_PRUNE_TOL
from .errors import DimensionMismatch, FsosError

IDENTITY_KEY = 0


@dataclass(frozen=True)
class GroupFunction:
    """Function on G as a sparse map {dual key -> complex coefficient}."""

    spec: GroupSpec
    keys: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.keys.shape != self.values.shape:
            raise DimensionMismatch("keys and values must have equal length")

    # -- construction --------------------------------------------------

    @classmethod
    def from_pairs(cls, spec: GroupSpec, keys, values,
                   prune: float = DEFAULT_PRUNE_TOL) -> "GroupFunction":
        """Build from parallel key/value sequences; sorts, merges, prunes."""
        keys = np.asarray(keys, dtype=spec.key_dtype)
        values = np.asarray(values, dtype=np.complex128)
        keys, values = kernels.sum_by_key(keys, values)
        keep = np.abs(values) >= prune
        return cls(spec, keys[keep], values[keep])

    @classmethod
    def from_coeffs(cls, spec: GroupSpec, coeffs: dict[DualIndex, complex],
                    prune: float = DEFAULT_PRUNE_TOL) -> "GroupFunction":
        if not coeffs:
            return cls.zero(spec)
        for a in coeffs:
            abelian.validate_dual(spec, a)
        keys = [abelian.key_of_dual(spec, a) for a in coeffs]
        return cls.from_pairs(spec, keys, list(coeffs.values()), prune=prune)

    @classmethod
    def zero(cls, spec: GroupSpec) -> "GroupFunction":
        return cls(spec, np.empty(0, dtype=spec.key_dtype),
                   np.empty(0, dtype=np.complex128))

    @classmethod
    def constant(cls, spec: GroupSpec, c: complex,
                 prune: float = DEFAULT_PRUNE_TOL) -> "GroupFunction":
        if abs(c) < prune:
            return cls.zero(spec)
        return cls(spec, np.array([IDENTITY_KEY], dtype=spec.key_dtype),
                   np.array([c], dtype=np.complex128))

    @classmethod
    def from_table(cls, spec: GroupSpec, table,
                   prune: float = DEFAULT_PRUNE_TOL) -> "GroupFunction":
        """Transform a dense value table (frozen enumeration order)."""
        coeffs = abelian.fft(spec, table)
        keys = np.flatnonzero(np.abs(coeffs) >= prune)
        return cls(spec, keys.astype(spec.key_dtype), coeffs[keys])

    # -- basic queries ---------------------------------------------------

    @property
    def sparsity(self) -> int:
        return int(self.keys.shape[0])

    def coefficient(self, alpha: DualIndex) -> complex:
        key = abelian.key_of_dual(self.spec, alpha)
        i = np.searchsorted(self.keys, key)
        if i < self.sparsity and self.keys[i] == key:
            return complex(self.values[i])
        return 0j

    def coefficients_at(self, keys) -> np.ndarray:
        """Vectorized coefficient lookup for packed keys (0 where absent)."""
        keys = np.asarray(keys)
        if self.sparsity == 0:
            return np.zeros(keys.shape, dtype=np.complex128)
        pos = np.searchsorted(self.keys, keys)
        pos = np.minimum(pos, self.sparsity - 1)
        hit = self.keys[pos] == keys
        out = np.where(hit, self.values[pos], 0j)
        return out

    @property
    def constant_term(self) -> complex:
        k = np.searchsorted(self.keys, IDENTITY_KEY)
        if k < self.sparsity and self.keys[k] == IDENTITY_KEY:
            return complex(self.values[k])
        return 0j

    def is_real(self, tol: float = 1e-9) -> bool:
        """True when coefficients satisfy conj-symmetry under key inversion."""
        if self.sparsity == 0:
            return True
        inv = abelian.invert_keys(self.spec, self.keys)
        mirrored = self.coefficients_at(inv)
        return bool(np.max(np.abs(mirrored - np.conj(self.values))) <= tol)

    def max_degree(self) -> int:
        if self.sparsity == 0:
            return 0
        return int(abelian.degree_of_keys(self.spec, self.keys).max())

    def is_integer_valued(self, tol: float = 1e-6) -> bool:
        """Check all values against integers (dense; cap applies)."""
        table = self.to_table().real
        return bool(np.max(np.abs(table - np.round(table))) < tol) if table.size else True

    def l1_nonconstant(self) -> float:
        """Sum of |coefficient| over non-identity characters."""
        mask = self.keys != IDENTITY_KEY
        return float(np.abs(self.values[mask]).sum())

    # -- algebra -----------------------------------------------------------

    def _binary_check(self, other: "GroupFunction") -> None:
        if self.spec != other.spec:
            raise DimensionMismatch(
                f"operands live on {self.spec} and {other.spec}"
            )

    def __add__(self, other: "GroupFunction") -> "GroupFunction":
        self._binary_check(other)
        return GroupFunction.from_pairs(
            self.spec,
            np.concatenate([self.keys, other.keys]),
            np.concatenate([self.values, other.values]),
        )

    def scaled(self, c: complex) -> "GroupFunction":
        if c == 0:
            return GroupFunction.zero(self.spec)
        return GroupFunction(self.spec, self.keys, self.values * c)

    def add_constant(self, c: complex) -> "GroupFunction":
        return self + GroupFunction.constant(self.spec, c)

    def multiply(self, other: "GroupFunction",
                 cap: int | None = DEFAULT_CONVOLVE_CAP,
                 prune: float = DEFAULT_PRUNE_TOL) -> "GroupFunction":
        """Pointwise product, computed as convolution of coefficients."""
        self._binary_check(other)
        if self.sparsity == 0 or other.sparsity == 0:
            return GroupFunction.zero(self.spec)
        keys, vals = kernels.convolve(
            self.spec, self.keys, self.values, other.keys, other.values, cap=cap
        )
        keep = np.abs(vals) >= prune
        return GroupFunction(self.spec, keys[keep], vals[keep])

    # -- evaluation ----------------------------------------------------------

    def evaluate(self, g: GroupElement) -> complex:
        chi = abelian.char_values_at(self.spec, self.keys, g)
        return complex(np.dot(self.values, chi))

    def to_table(self) -> np.ndarray:
        """Dense value table in enumeration order (requires |G| <= cap)."""
        self.spec.check_dense("to_table")
        coeffs = np.zeros(self.spec.size, dtype=np.complex128)
        if self.sparsity:
            coeffs[self.keys.astype(np.int64)] = self.values
        return abelian.ifft(self.spec, coeffs)

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        terms = [
            {"exps": [int(e) for e in abelian.dual_of_key(self.spec, k).exps],
             "re": float(v.real), "im": float(v.imag)}
            for k, v in zip(self.keys, self.values)
        ]
        return {"orders": list(self.spec.orders), "terms": terms}

    @classmethod
    def from_json_dict(cls, data: dict) -> "GroupFunction":
        try:
            spec = GroupSpec(tuple(int(d) for d in data["orders"]))
            keys, vals = [], []
            for t in data["terms"]:
                a = DualIndex(tuple(int(e) for e in t["exps"]))
                abelian.validate_dual(spec, a)
                keys.append(abelian.key_of_dual(spec, a))
                vals.append(complex(float(t["re"]), float(t.get("im", 0.0))))
        except (KeyError, TypeError, ValueError) as exc:
            raise FsosError(f"malformed function JSON: {exc}") from exc
        if not keys:
            return cls.zero(spec)
        return cls.from_pairs(spec, keys, vals, prune=0.0)


# -- module-level operation names ------------------------------------------


def from_table(spec: GroupSpec, table, prune: float = DEFAULT_PRUNE_TOL) -> GroupFunction:
    return GroupFunction.from_table(spec, table, prune=prune)


def to_table(f: GroupFunction) -> np.ndarray:
    return f.to_table()


def evaluate(f: GroupFunction, g: GroupElement) -> complex:
    return f.evaluate(g)


def multiply(f: GroupFunction, h: GroupFunction, **kw) -> GroupFunction:
    return f.multiply(h, **kw)


def brute_force_min(f: GroupFunction, real_tol: float = 1e-9
                    ) -> tuple[float, GroupElement]:
    """Exact minimum over all of G with one attaining point.

    Ties break to the lowest enumeration index.  Requires a real-valued
    function and a group under the dense cap.
    """
    if not f.is_real():
        raise FsosError("brute_force_min needs a real-valued function")
    table = f.to_table()
    if f.sparsity and np.max(np.abs(table.imag)) > real_tol * max(
        1.0, float(np.max(np.abs(table.real)))
    ):
        raise FsosError("function table has a non-negligible imaginary part")
    idx = int(np.argmin(table.real))
    return float(table.real[idx]), abelian.element_of_key(f.spec, idx)
