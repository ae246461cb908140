"""Seeded random instance generators for experiments and benchmarks."""

from __future__ import annotations

import warnings
from itertools import combinations

import numpy as np

from . import abelian
from .abelian import GroupSpec
from .cnf import Clause, CnfFormula
from .config import dense_cap
from .errors import FsosError
from .gfunc import GroupFunction, brute_force_min


def _shift_to_zero_min(f: GroupFunction, shift: bool) -> GroupFunction:
    if not shift:
        return f
    if f.spec.size > dense_cap():
        warnings.warn(
            f"|G| = {f.spec.size} exceeds the dense cap; constant term left "
            "unshifted (minimum unknown)"
        )
        return f
    mn, _ = brute_force_min(f)
    return f.add_constant(-mn)


def gen_random_c2(n: int, max_degree: int = 3, max_sparsity: int = 50,
                  coeff_bound: int = 5, seed: int = 0,
                  shift: bool = True) -> GroupFunction:
    """Random integer-coefficient function on C2^n of bounded degree.

    Distinct non-constant characters of degree <= max_degree are sampled
    uniformly; coefficients are uniform integers in [-coeff_bound,
    coeff_bound] (zeros drop out, so sparsity is <= max_sparsity).  The
    constant term is then set so the minimum is zero, group size permitting.
    """
    if n < 1 or max_degree < 1 or coeff_bound < 1 or max_sparsity < 0:
        raise FsosError("generator parameters must be positive")
    spec = GroupSpec((2,) * n)
    pool: list[int] = []
    for deg in range(1, min(max_degree, n) + 1):
        pool.extend(sum(1 << (i) for i in combo)
                    for combo in combinations(range(n), deg))
    if max_sparsity > len(pool):
        raise FsosError(
            f"requested sparsity {max_sparsity} exceeds the {len(pool)} "
            f"characters of degree <= {max_degree}"
        )
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(pool), size=max_sparsity, replace=False)
    keys = np.asarray([pool[i] for i in chosen], dtype=spec.key_dtype)
    coeffs = rng.integers(-coeff_bound, coeff_bound + 1, size=max_sparsity)
    f = GroupFunction.from_pairs(spec, keys, coeffs.astype(np.complex128))
    return _shift_to_zero_min(f, shift)


def gen_random_c3(n: int, sparsity_floor: int, h_bound: int = 10,
                  seed: int = 0, shift: bool = True) -> GroupFunction:
    """Random integer-valued function on C3^n built from two-coordinate blocks.

    Repeatedly draws a random integer function h on C3^2 with 0 <= h <=
    h_bound and a random projection onto two coordinates, accumulating
    f += h(projection) until the sparsity exceeds the floor; finally shifts
    the minimum to zero when the group is small enough to enumerate.
    """
    if n < 2:
        raise FsosError("need at least two coordinates")
    spec = GroupSpec((3,) * n)
    block_spec = GroupSpec((3, 3))
    rng = np.random.default_rng(seed)
    f = GroupFunction.zero(spec)
    while f.sparsity <= sparsity_floor:
        h_table = rng.integers(0, h_bound + 1, size=9).astype(np.complex128)
        h_coeffs = abelian.fft(block_spec, h_table)
        i, j = rng.choice(n, size=2, replace=False)
        keys = []
        for key2 in range(9):
            a, b = key2 % 3, key2 // 3
            keys.append(a * spec.weights[i] + b * spec.weights[j])
        block = GroupFunction.from_pairs(
            spec, np.asarray(keys, dtype=spec.key_dtype), h_coeffs)
        f = f + block
    return _shift_to_zero_min(f, shift)


def gen_random_2sat(n: int, m: int, seed: int = 0) -> CnfFormula:
    """m random 2-clauses over n variables: distinct variable pair, uniform
    polarities, unit weights.  Duplicate clauses are kept."""
    if n < 2:
        raise FsosError("need at least two variables")
    if m < 1:
        raise FsosError("need at least one clause")
    rng = np.random.default_rng(seed)
    clauses = []
    for _ in range(m):
        vi, vj = (int(v) + 1 for v in rng.choice(n, size=2, replace=False))
        pol_i, pol_j = rng.integers(0, 2, size=2)
        lits = ((vi, pol_i), (vj, pol_j))
        pos = frozenset(v for v, p in lits if p)
        neg = frozenset(v for v, p in lits if not p)
        clauses.append(Clause(pos, neg, 1))
    return CnfFormula(n, tuple(clauses))
