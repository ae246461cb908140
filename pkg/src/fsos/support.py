"""Support selection for the Gram SDP: sqrt fit, composition, top-k pick.

The square root of a nonnegative function is approximated by a low-degree
polynomial fitted in the minimax sense on an integer grid; composing that
polynomial with the function (in the sparse coefficient algebra) estimates
the coefficients of sqrt(f), whose largest entries form the support.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import abelian
from .abelian import DualIndex, GroupSpec
from .config import DEFAULT_CONVOLVE_CAP
from .errors import FsosError, SolverError
from .gfunc import IDENTITY_KEY, GroupFunction

MAX_SQRT_DEGREE = 10


@dataclass(frozen=True)
class SqrtPoly:
    """Polynomial minimax fit to sqrt(t) on the integer grid of [lo, hi].

    `coeffs` are monomial coefficients in t, ascending order.  Evaluation
    and composition use the shifted/scaled variable u=(t-lo)/(hi-lo) for
    conditioning; `sup_error` is the exact maximum of |p(i)-sqrt(i)| over
    the fitted grid.
    """

    degree: int
    coeffs: tuple[float, ...]
    lo: int
    hi: int
    sup_error: float
    u_coeffs: tuple[float, ...]

    def _u(self, t):
        scale = 1.0 / (self.hi - self.lo) if self.hi > self.lo else 1.0
        return (np.asarray(t, dtype=np.float64) - self.lo) * scale

    def __call__(self, t):
        u = self._u(t)
        acc = np.zeros_like(u) + self.u_coeffs[-1]
        for c in self.u_coeffs[-2::-1]:
            acc = acc * u + c
        return acc if acc.shape else float(acc)


def _grid(lo: int, hi: int) -> np.ndarray:
    return np.arange(max(lo, 0), hi + 1, dtype=np.float64)


def _u_to_t_coeffs(u_coeffs, lo: int, hi: int) -> tuple[float, ...]:
    # compose p(u) with u = (t - lo)*scale via Horner on polynomials
    scale = 1.0 / (hi - lo) if hi > lo else 1.0
    lin = np.array([-lo * scale, scale])
    acc = np.array([u_coeffs[-1]])
    for c in u_coeffs[-2::-1]:
        acc = np.polynomial.polynomial.polymul(acc, lin)
        acc[0] += c
    return tuple(float(x) for x in acc)


def _simplex_max_eq(A: np.ndarray, b: np.ndarray, c: np.ndarray,
                    tol: float = 1e-11, max_iter: int = 20000):
    """Revised simplex with Bland's rule: max c@x s.t. Ax=b (b>=0), x>=0.

    Returns (x, basis).  Small m only; B is re-solved densely each step.
    """
    m, n = A.shape

    def run(Afull, cost, basis):
        for _ in range(max_iter):
            B = Afull[:, basis]
            xb = np.linalg.solve(B, b)
            y = np.linalg.solve(B.T, cost[basis])
            reduced = cost - y @ Afull
            reduced[basis] = 0.0
            entering = -1
            for j in range(Afull.shape[1]):
                if reduced[j] > tol:
                    entering = j
                    break
            if entering < 0:
                return basis, xb
            direction = np.linalg.solve(B, Afull[:, entering])
            ratios = np.full(m, np.inf)
            mask = direction > tol
            ratios[mask] = xb[mask] / direction[mask]
            best = np.inf
            leave = -1
            for i in range(m):
                if ratios[i] < best - 1e-15 or (
                    ratios[i] < best + 1e-15 and (leave < 0 or basis[i] < basis[leave])
                ):
                    if np.isfinite(ratios[i]):
                        best = ratios[i]
                        leave = i
            if leave < 0:
                raise SolverError("LP unbounded (unexpected for minimax fit)")
            basis = basis.copy()
            basis[leave] = entering
        raise SolverError("simplex iteration limit reached")

    # phase 1: artificial identity basis
    Afull = np.hstack([A, np.eye(m)])
    cost1 = np.concatenate([np.zeros(n), -np.ones(m)])
    basis = np.arange(n, n + m)
    basis, xb = run(Afull, cost1, basis)
    if float(cost1[basis] @ xb) < -1e-8:
        raise SolverError("LP infeasible (unexpected for minimax fit)")
    # pivot any leftover artificials out, dropping dependent rows is not
    # needed here: the constraint rows are independent for hi > lo grids
    for i in range(m):
        if basis[i] >= n:
            B = Afull[:, basis]
            for j in range(n):
                if j in basis:
                    continue
                direction = np.linalg.solve(B, Afull[:, j])
                if abs(direction[i]) > 1e-9:
                    basis = basis.copy()
                    basis[i] = j
                    break
    if np.any(basis >= n):
        raise SolverError("degenerate LP basis (dependent constraints)")
    # phase 2 on original columns only
    basis, xb = run(A, c, basis)
    x = np.zeros(n)
    x[basis] = xb
    return x, basis


def minimax_sqrt_poly(lo: int, hi: int, degree: int) -> SqrtPoly:
    """Best degree-<=d fit to sqrt(t) at the integer points of [lo, hi],
    in the sup norm (discrete minimax, solved as a small LP)."""
    lo, hi, degree = int(lo), int(hi), int(degree)
    if hi < lo or hi < 0:
        raise FsosError(f"degenerate fit range [{lo},{hi}]")
    if degree < 0 or degree > MAX_SQRT_DEGREE:
        raise FsosError(f"degree must be in [0,{MAX_SQRT_DEGREE}], got {degree}")
    ts = _grid(lo, hi)
    if ts.size == 0:
        raise FsosError(f"no integer points in [{lo},{hi}]")
    sq = np.sqrt(ts)
    scale = 1.0 / (hi - lo) if hi > lo else 1.0
    us = (ts - lo) * scale
    npts = ts.size

    if npts <= degree + 1:
        # enough freedom to interpolate exactly
        deg_eff = npts - 1
        V = np.vander(us, deg_eff + 1, increasing=True)
        u_coeffs = np.linalg.solve(V, sq) if npts > 1 else np.array([sq[0]])
        u_coeffs = np.concatenate([u_coeffs, np.zeros(degree + 1 - u_coeffs.size)])
        achieved = float(np.max(np.abs(V @ u_coeffs[: deg_eff + 1] - sq)))
        return SqrtPoly(degree, _u_to_t_coeffs(u_coeffs, lo, hi), lo, hi,
                        achieved, tuple(float(x) for x in u_coeffs))

    # LP dual of:  min eps  s.t.  |p(t_i) - sqrt(t_i)| <= eps on the grid.
    # Variables y+ (upper constraints) and y- (lower constraints):
    #   max  s@(y-) - s@(y+)
    #   s.t. V.T@(y+ - y-) = 0,  1@(y+ + y-) = 1,  y >= 0
    V = np.vander(us, degree + 1, increasing=True)
    A = np.zeros((degree + 2, 2 * npts))
    A[: degree + 1, :npts] = V.T
    A[: degree + 1, npts:] = -V.T
    A[degree + 1, :] = 1.0
    b = np.zeros(degree + 2)
    b[degree + 1] = 1.0
    cvec = np.concatenate([-sq, sq])
    x, basis = _simplex_max_eq(A, b, cvec)

    # complementary primal solution from the optimal basis: B.T w = c_B,
    # with w = (-u_coeffs, eps)
    w = np.linalg.solve(A[:, basis].T, cvec[basis])
    u_coeffs = -w[: degree + 1]
    eps_lp = float(w[degree + 1])
    achieved = float(np.max(np.abs(V @ u_coeffs - sq)))
    if achieved > eps_lp + 1e-8:
        raise SolverError(
            f"minimax recovery mismatch: achieved {achieved} vs LP value {eps_lp}"
        )
    return SqrtPoly(degree, _u_to_t_coeffs(u_coeffs, lo, hi), lo, hi,
                    achieved, tuple(float(x) for x in u_coeffs))


def compose_poly(p: SqrtPoly, f: GroupFunction,
                 cap: int | None = DEFAULT_CONVOLVE_CAP) -> GroupFunction:
    """p(f) in the sparse coefficient algebra (Horner over convolutions)."""
    scale = 1.0 / (p.hi - p.lo) if p.hi > p.lo else 1.0
    g = f.add_constant(-p.lo).scaled(scale)
    acc = GroupFunction.constant(f.spec, p.u_coeffs[-1])
    for c in p.u_coeffs[-2::-1]:
        acc = acc.multiply(g, cap=cap).add_constant(c)
    return acc


@dataclass(frozen=True)
class SupportSet:
    """Ordered character set for the Gram SDP (identity first when present)."""

    spec: GroupSpec
    keys: np.ndarray

    def __post_init__(self):
        if len(set(int(k) if self.spec.packable else k for k in self.keys)) != len(self.keys):
            raise FsosError("support contains duplicate characters")

    @classmethod
    def from_duals(cls, spec: GroupSpec, chars: list[DualIndex]) -> "SupportSet":
        keys = np.asarray([abelian.key_of_dual(spec, a) for a in chars],
                          dtype=spec.key_dtype)
        return cls(spec, keys)

    @property
    def size(self) -> int:
        return int(self.keys.shape[0])

    @cached_property
    def identity_position(self) -> int:
        hits = np.flatnonzero(self.keys == IDENTITY_KEY)
        return int(hits[0]) if hits.size else -1

    def chars(self) -> list[DualIndex]:
        return [abelian.dual_of_key(self.spec, k) for k in self.keys]

    @cached_property
    def degree_one_positions(self) -> dict[int, int]:
        """Map axis index -> position of the character z_axis, where present."""
        out = {}
        for axis, w in enumerate(self.spec.weights):
            hits = np.flatnonzero(self.keys == w)
            if hits.size:
                out[axis] = int(hits[0])
        return out

    def has_full_m1(self) -> bool:
        return self.identity_position >= 0 and len(self.degree_one_positions) == self.spec.ndim

    def with_m1(self) -> "SupportSet":
        """Append the identity and any missing degree-one characters."""
        existing = set(int(k) if self.spec.packable else k for k in self.keys)
        missing_deg1 = [w for w in self.spec.weights
                        if (int(w) if self.spec.packable else w) not in existing]
        parts = []
        if self.identity_position < 0:
            parts.append([IDENTITY_KEY])
        parts.append(list(self.keys))
        parts.append(missing_deg1)
        flat = [k for part in parts for k in part]
        if len(flat) == self.size:
            return self
        return SupportSet(self.spec, np.asarray(flat, dtype=self.spec.key_dtype))


def ranked_characters(f: GroupFunction, lo: int, hi: int, degree: int,
                      prefer_low_degree_ties: bool = False,
                      cap: int | None = DEFAULT_CONVOLVE_CAP) -> list:
    """All characters of the composed sqrt estimate, strongest first.

    Sort order: |coefficient| descending, then total degree descending
    (the documented tie rule; set prefer_low_degree_ties to flip), then
    packed index ascending.
    """
    p = minimax_sqrt_poly(lo, hi, degree)
    pf = compose_poly(p, f, cap=cap)
    degs = abelian.degree_of_keys(f.spec, pf.keys)
    absv = np.abs(pf.values)
    tie = degs if prefer_low_degree_ties else -degs
    if f.spec.packable:
        order = np.lexsort((pf.keys, tie, -absv))
    else:
        order = sorted(range(pf.sparsity),
                       key=lambda i: (-absv[i], tie[i], pf.keys[i]))
    return [pf.keys[i] for i in order]


def select_support(f: GroupFunction, lo: int, hi: int, degree: int, k: int,
                   prefer_low_degree_ties: bool = False,
                   cap: int | None = DEFAULT_CONVOLVE_CAP) -> SupportSet:
    """Pick k characters carrying the largest coefficients of p(f) ~ sqrt(f).

    The identity character is always included, since it carries the
    constant/trace term of the SDP.  If fewer than k characters are
    available, pads with lowest-index degree-one characters and warns.
    """
    if k < 1:
        raise FsosError(f"support size k must be >= 1, got {k}")
    k = min(k, f.spec.size)
    ranked = ranked_characters(f, lo, hi, degree,
                               prefer_low_degree_ties=prefer_low_degree_ties,
                               cap=cap)

    chosen: list = []
    seen = set()
    for key in ranked:
        ik = int(key) if f.spec.packable else key
        if ik == IDENTITY_KEY or ik in seen:
            continue
        chosen.append(key)
        seen.add(ik)
        if len(chosen) >= k - 1:
            break
    if len(chosen) < k - 1:
        pads = [w for w in f.spec.weights
                if (int(w) if f.spec.packable else w) not in seen]
        pads = pads[: k - 1 - len(chosen)]
        if pads:
            warnings.warn(
                f"support request k={k} exceeds available composed terms; "
                f"padded with {len(pads)} degree-one characters"
            )
        chosen.extend(pads)

    keys = np.asarray([IDENTITY_KEY] + chosen, dtype=f.spec.key_dtype)
    return SupportSet(f.spec, keys)


def sqrt_coeff_error_check(f: GroupFunction, p: SqrtPoly,
                           slack: float = 1e-9) -> float:
    """Max coefficient gap between the sparse composition p(f) and the dense
    expansion of sqrt(f); raises if it exceeds the fit error.

    Diagnostic only: needs a dense table, and the guarantee presumes f's
    values sit on the fitted integer grid.
    """
    table = f.to_table()
    vals = table.real
    if float(vals.min()) < -1e-9:
        raise FsosError(f"f takes negative value {vals.min():.3g}; sqrt undefined")
    sqrt_coeffs = abelian.fft(f.spec, np.sqrt(np.clip(vals, 0.0, None)))
    pf = compose_poly(p, f)
    dense_pf = np.zeros(f.spec.size, dtype=np.complex128)
    if pf.sparsity:
        dense_pf[pf.keys.astype(np.int64)] = pf.values
    err = float(np.max(np.abs(dense_pf - sqrt_coeffs)))
    if err > p.sup_error + slack:
        raise FsosError(
            f"coefficient error {err:.3g} exceeds fit bound {p.sup_error:.3g}"
        )
    return err
