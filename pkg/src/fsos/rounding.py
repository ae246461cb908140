"""Recover candidate minimizers from Gram/moment matrices.

Near an optimal solution, null vectors of the (PSD-shifted) Gram matrix are
spanned by character-evaluation vectors of minimizers: normalize the
identity entry, read off the degree-one entries, and snap each to the
nearest root of unity.  With a nullspace of dimension > 1 the entries of a
single null vector are not algebraically consistent, so minimizers are
separated through the eigenvectors of a multiplication-by-random-linear-form
matrix expressed on the null basis.  The moment route takes the rank-one
approximation of the dual moment matrix instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import abelian
from .abelian import GroupElement
from .errors import FsosError, RoundingError
from .gfunc import GroupFunction
from .sdp import HermitianMatrix
from .support import SupportSet

NORMALIZE_TOL = 1e-6
CONDITION_LIMIT = 1e8

_METHOD_RANK = {"gram-null": 0, "stickelberger": 1, "moment": 2}


@dataclass(frozen=True)
class RoundedSolution:
    """Candidate minimizers found by one rounding method."""

    method: str
    candidates: tuple[tuple[GroupElement, float], ...]
    achieved: float
    witness: GroupElement
    gap: float | None = None
    low_confidence: bool = False


def _nearest_root_residue(order: int, v: complex) -> int:
    if order == 2:
        return 0 if v.real >= 0 else 1
    ang = float(np.angle(v))  # angle(0) == 0: ties go to the identity root
    return int(np.round(ang * order / (2 * np.pi))) % order


def decode_root_vector(spec: abelian.GroupSpec, values) -> GroupElement:
    """Coordinates from per-axis approximate character values."""
    coords = tuple(
        _nearest_root_residue(d, complex(v)) for d, v in zip(spec.orders, values)
    )
    return GroupElement(coords)


def _axis_values(support: SupportSet, vec: np.ndarray) -> list[complex]:
    pos = support.degree_one_positions
    missing = [axis for axis in range(support.spec.ndim) if axis not in pos]
    if support.identity_position < 0 or missing:
        raise RoundingError(
            "support must contain the identity and all degree-one characters "
            f"for rounding (missing axes {missing})"
        )
    return [complex(vec[pos[axis]]) for axis in range(support.spec.ndim)]


def _package(method: str, f: GroupFunction, elements: list[GroupElement],
             bound: float | None, low_confidence: bool = False) -> RoundedSolution:
    seen = set()
    cands = []
    for g in elements:
        key = int(abelian.key_of_element(f.spec, g)) if f.spec.packable else \
            abelian.key_of_element(f.spec, g)
        if key in seen:
            continue
        seen.add(key)
        val = f.evaluate(g)
        cands.append((g, float(val.real), key))
    if not cands:
        raise RoundingError(f"{method}: no candidates survived decoding")
    cands.sort(key=lambda c: (c[1], c[2]))
    achieved = cands[0][1]
    gap = achieved - bound if bound is not None else None
    return RoundedSolution(
        method=method,
        candidates=tuple((g, v) for g, v, _ in cands),
        achieved=achieved,
        witness=cands[0][0],
        gap=gap,
        low_confidence=low_confidence,
    )


def _null_basis(Q: HermitianMatrix):
    """PSD-shift Q and return (eigvals of shifted Q, eigvecs, null mask)."""
    Q.validate(tol=1e-9)
    w, U = Q.eigh()
    shift = min(float(w[0]), 0.0)
    w_shifted = w - shift
    null_tol = max(NORMALIZE_TOL, 1e-9 * float(w_shifted[-1]))
    mask = w_shifted <= null_tol
    return w_shifted, U, mask


def gram_null_round(Q: HermitianMatrix, support: SupportSet, f: GroupFunction,
                    bound: float | None = None) -> RoundedSolution:
    """Corank-one rounding: normalize the identity entry of the null vector
    of the PSD-shifted Gram matrix and decode its degree-one entries."""
    _, U, mask = _null_basis(Q)
    corank = int(mask.sum())
    if corank == 0:
        raise RoundingError("no null vector (shifted matrix is positive definite)")
    if corank > 1:
        raise RoundingError(
            f"nullspace has dimension {corank} > 1; use stickelberger_round"
        )
    v = U[:, int(np.flatnonzero(mask)[0])]
    idp = support.identity_position
    if idp < 0:
        raise RoundingError("support lacks the identity character")
    c = complex(v[idp])
    if abs(c) < NORMALIZE_TOL:
        raise RoundingError("unnormalizable null vector (identity entry ~ 0)")
    v = v / c
    g = decode_root_vector(support.spec, _axis_values(support, v))
    return _package("gram-null", f, [g], bound)


def stickelberger_round(Q: HermitianMatrix, support: SupportSet,
                        f: GroupFunction, seed: int = 0,
                        bound: float | None = None) -> RoundedSolution:
    """Multi-minimizer extraction from a nullspace of dimension >= 1.

    A random real linear form L = sum_i c_i z_i acts on null vectors by
    entry shifts (L*u)[a] = sum_i c_i u[z_i a] wherever z_i*a stays inside
    the support; expressing that action back on the null basis by least
    squares gives a matrix whose eigenvectors decode to the minimizers.
    """
    _, U, mask = _null_basis(Q)
    corank = int(mask.sum())
    if corank == 0:
        raise RoundingError("no null vector (shifted matrix is positive definite)")
    W = U[:, mask]
    spec = support.spec
    idp = support.identity_position
    if idp < 0:
        raise RoundingError("support lacks the identity character")

    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=spec.ndim)

    # positions of z_i * a within the support, -1 when outside
    key_to_pos = {
        (int(k) if spec.packable else k): i for i, k in enumerate(support.keys)
    }
    k = support.size
    shift_pos = np.full((spec.ndim, k), -1, dtype=np.int64)
    for axis, w_key in enumerate(spec.weights):
        shifted = abelian.combine_keys(spec, np.asarray([w_key], dtype=spec.key_dtype),
                                       support.keys).reshape(-1)
        for a in range(k):
            shift_pos[axis, a] = key_to_pos.get(
                int(shifted[a]) if spec.packable else shifted[a], -1)

    defined = np.flatnonzero((shift_pos >= 0).all(axis=0))
    if defined.size < corank:
        raise RoundingError(
            f"only {defined.size} support rows admit the multiplication "
            f"action but the nullspace has dimension {corank}; "
            "use moment_round"
        )
    L = np.zeros((defined.size, k), dtype=np.complex128)
    for row, a in enumerate(defined):
        for axis in range(spec.ndim):
            L[row, shift_pos[axis, a]] += coeffs[axis]
    W_def = W[defined, :]
    if np.linalg.cond(W_def) > CONDITION_LIMIT:
        raise RoundingError(
            "null basis is ill-conditioned on the defined rows; use moment_round"
        )
    M_def = L @ W
    B, *_ = np.linalg.lstsq(W_def, M_def, rcond=1e-8)

    eigvals, vecs = np.linalg.eig(B)
    elements = []
    for j in range(vecs.shape[1]):
        v = W @ vecs[:, j]
        c = complex(v[idp])
        if abs(c) < NORMALIZE_TOL:
            continue
        v = v / c
        elements.append(decode_root_vector(spec, _axis_values(support, v)))
    return _package("stickelberger", f, elements, bound)


def moment_round(H: HermitianMatrix, support: SupportSet, f: GroupFunction,
                 bound: float | None = None) -> RoundedSolution:
    """Rank-one moment rounding: read first-order moments off the top
    eigenpair and snap each to the nearest root of unity."""
    H.validate(tol=1e-9)
    idp = support.identity_position
    if idp < 0:
        raise RoundingError("support lacks the identity character")
    w, U = H.eigh()
    mu = float(w[-1])
    if mu <= 0:
        raise RoundingError(f"moment matrix has no positive eigenvalue (top {mu:.3g})")
    u = U[:, -1]
    rank1_row = mu * u[idp] * np.conj(u)  # row of mu*u u^* at the identity
    xs = _axis_values(support, rank1_row)
    low = any(abs(x) < 0.5 for x in xs)
    g = decode_root_vector(support.spec, xs)
    return _package("moment", f, [g], bound, low_confidence=low)


def gram_round(Q: HermitianMatrix, support: SupportSet, f: GroupFunction,
               seed: int = 0, bound: float | None = None) -> RoundedSolution:
    """Gram-matrix rounding: corank-one fast path, Stickelberger fallback."""
    try:
        return gram_null_round(Q, support, f, bound=bound)
    except RoundingError as exc:
        if "dimension" not in str(exc):
            raise
        return stickelberger_round(Q, support, f, seed=seed, bound=bound)


def best_candidate(f: GroupFunction,
                   solutions: list[RoundedSolution]) -> RoundedSolution:
    """Lowest achieved value; ties prefer gram-null, then stickelberger,
    then moment, then lowest enumeration index of the witness."""
    if not solutions:
        raise FsosError("no rounded solutions to choose from")

    def sort_key(sol: RoundedSolution):
        wkey = abelian.key_of_element(f.spec, sol.witness)
        return (sol.achieved, _METHOD_RANK.get(sol.method, 99), int(wkey)
                if f.spec.packable else wkey)

    return min(solutions, key=sort_key)
