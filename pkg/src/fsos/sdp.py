"""Gram-matrix SDP: assembly, first-order splitting solver, moment matrix.

For a support S, the program is

    max  f0 - trace(Q)   s.t.   sum_{a^-1 b = gamma} Q[a,b] = fhat(gamma)
                                for every nonidentity gamma, and Q PSD.

Pairs (a,b) partition S x S by their character ratio gamma = a^-1 b, so the
constraint operator A has diagonal normal equations: (A A*)y = |pairs| * y.
The solver alternates an exact multiplier step with a projection onto the
PSD cone, keeping every iterate usable for an eigenvalue-slack lower bound:
solutions never have to reach feasibility to certify something.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import abelian, kernels
from .abelian import DualIndex
from .errors import DimensionMismatch, FsosError, SolverError
from .gfunc import IDENTITY_KEY, GroupFunction
from .support import SupportSet


@dataclass(frozen=True)
class HermitianMatrix:
    """Hermitian matrix indexed by an ordered character support."""

    support: SupportSet
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        k = self.support.size
        if self.values.shape != (k, k):
            raise DimensionMismatch(
                f"matrix shape {self.values.shape} does not match |S|={k}"
            )

    def validate(self, tol: float = 1e-12) -> None:
        gap = np.max(np.abs(self.values - self.values.conj().T)) if self.support.size else 0.0
        if gap > tol:
            raise FsosError(f"matrix is not Hermitian (asymmetry {gap:.3g})")

    @property
    def trace(self) -> float:
        return float(np.trace(self.values).real)

    def eigh(self):
        try:
            return np.linalg.eigh(self.values)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"eigendecomposition failed: {exc}") from exc

    def lambda_min(self) -> float:
        w, _ = self.eigh()
        return float(w[0])


def hermitian_part(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.conj().T)


def _psd_project_array(M: np.ndarray) -> np.ndarray:
    try:
        w, U = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"eigendecomposition failed: {exc}") from exc
    wp = np.clip(w, 0.0, None)
    return (U * wp) @ U.conj().T


def psd_project(M: HermitianMatrix) -> HermitianMatrix:
    """Nearest PSD matrix in Frobenius norm (negative eigenvalues zeroed)."""
    M.validate(tol=1e-10)
    return HermitianMatrix(M.support, _psd_project_array(hermitian_part(M.values)))


@dataclass(frozen=True)
class GramSystem:
    """Pair-structured constraint data tying Q entries to Fourier coefficients.

    positions[offsets[g]:offsets[g+1]] are row-major flat indices into Q of
    the pairs whose ratio is gamma_keys[g]; group 0 is always the identity
    ratio, i.e. the diagonal.  extra_* hold coefficients of f outside the
    product set P = {a^-1 b}; they enter bounds as constant residuals.
    """

    f: GroupFunction
    support: SupportSet
    gamma_keys: np.ndarray = field(repr=False)
    offsets: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)
    extra_keys: np.ndarray = field(repr=False)
    extra_values: np.ndarray = field(repr=False)
    is_real: bool

    @property
    def size(self) -> int:
        return self.support.size

    @property
    def n_constraints(self) -> int:
        return int(self.gamma_keys.shape[0]) - 1

    @property
    def f0(self) -> float:
        return float(self.f.constant_term.real)

    @property
    def extra_l1(self) -> float:
        return float(np.abs(self.extra_values).sum())

    def matrix_dtype(self):
        return np.float64 if self.is_real else np.complex128

    def apply(self, Q: np.ndarray) -> np.ndarray:
        """A(Q): per-ratio entry sums, aligned with gamma_keys."""
        return kernels.gather_groups(np.ascontiguousarray(Q).reshape(-1),
                                     self.positions, self.offsets)

    def scatter(self, y_by_gamma: np.ndarray) -> np.ndarray:
        """A*(y): matrix whose (a,b) entry is y at gamma = a^-1 b."""
        k = self.size
        out = np.zeros(k * k, dtype=y_by_gamma.dtype)
        out[self.positions] = np.repeat(y_by_gamma, self.counts)
        return out.reshape(k, k)

    def scatter_nonidentity(self, y: np.ndarray) -> np.ndarray:
        """scatter() for a vector that skips the identity-ratio group."""
        return self.scatter(np.concatenate([np.zeros(1, dtype=y.dtype), y]))

    def residual_values(self, Q: np.ndarray) -> np.ndarray:
        """fhat(gamma) - A_gamma(Q) on nonidentity ratios (targets order)."""
        return self.targets[1:] - self.apply(Q)[1:]

    def bound_parts(self, Q: np.ndarray, lam_min: float | None = None):
        """Eigenvalue-slack lower bound for any Hermitian Q on this support.

        Returns (bound, resid, lam_min) with
        bound = f0 - trace(Q) - ||resid||_1 - extra_l1 + lam_min*|S|.
        """
        resid = self.residual_values(Q)
        if lam_min is None:
            try:
                w = np.linalg.eigvalsh(Q)
            except np.linalg.LinAlgError as exc:
                raise SolverError(f"eigendecomposition failed: {exc}") from exc
            lam_min = float(w[0]) if w.size else 0.0
        bound = (
            self.f0
            - float(np.trace(Q).real)
            - float(np.abs(resid).sum())
            - self.extra_l1
            + lam_min * self.size
        )
        return bound, resid, lam_min


def assemble_gram_system(f: GroupFunction, support: SupportSet) -> GramSystem:
    """Group all |S|^2 pairs by their character ratio and attach targets."""
    if f.spec != support.spec:
        raise DimensionMismatch("function and support live on different groups")
    if support.size == 0:
        raise FsosError("empty support")
    spec = f.spec
    inv = abelian.invert_keys(spec, support.keys)
    orders = np.asarray(spec.orders, dtype=np.int64)
    weights = np.asarray(spec.weights,
                         dtype=np.int64 if spec.packable else object)
    gamma_flat = kernels.pair_combine(inv, support.keys, orders, weights,
                                      spec.is_two_group)
    order = np.argsort(gamma_flat, kind="mergesort")
    sorted_gamma = gamma_flat[order]
    boundary = np.empty(sorted_gamma.shape[0], dtype=bool)
    boundary[0] = True
    boundary[1:] = sorted_gamma[1:] != sorted_gamma[:-1]
    starts = np.flatnonzero(boundary)
    gamma_keys = sorted_gamma[starts]
    offsets = np.concatenate([starts, [sorted_gamma.shape[0]]]).astype(np.int64)
    counts = np.diff(offsets)
    if int(gamma_keys[0]) != IDENTITY_KEY:
        raise SolverError("identity ratio missing from pair map")  # diagonal always maps to it

    targets = f.coefficients_at(gamma_keys)

    # coefficients of f outside P contribute constant residuals
    if f.sparsity:
        pos = np.searchsorted(gamma_keys, f.keys)
        pos = np.minimum(pos, gamma_keys.shape[0] - 1)
        inside = gamma_keys[pos] == f.keys
        extra_keys = f.keys[~inside]
        extra_values = f.values[~inside]
    else:
        extra_keys = np.empty(0, dtype=spec.key_dtype)
        extra_values = np.empty(0, dtype=np.complex128)

    is_real = bool(
        spec.is_two_group
        and (f.sparsity == 0 or float(np.max(np.abs(f.values.imag))) < 1e-12)
    )
    return GramSystem(
        f=f, support=support, gamma_keys=gamma_keys, offsets=offsets,
        positions=order.astype(np.int64), counts=counts, targets=targets,
        extra_keys=extra_keys, extra_values=extra_values, is_real=is_real,
    )


@dataclass(frozen=True)
class SdpOptions:
    max_iter: int = 50_000
    tol: float = 1e-7
    rho: float = 1.0
    time_cap: float | None = None
    check_every: int = 100
    adaptive_rho: bool = True
    telemetry: object = None  # callable(dict) per checkpoint


@dataclass(frozen=True)
class SdpSolution:
    """Solver output; residuals are recomputed from Q, not trusted from the loop."""

    Q: HermitianMatrix
    bound: float
    last_Q: HermitianMatrix
    multiplier_keys: np.ndarray = field(repr=False)
    multiplier_values: np.ndarray = field(repr=False)
    H: HermitianMatrix
    residual_max: float
    residual_l1: float
    psd_violation: float
    iterations: int
    status: str
    wall_time: float

    def multipliers(self) -> dict[DualIndex, complex]:
        spec = self.Q.support.spec
        return {abelian.dual_of_key(spec, k): complex(v)
                for k, v in zip(self.multiplier_keys, self.multiplier_values)}


def moment_from_duals(sys: GramSystem, y_by_gamma: np.ndarray) -> HermitianMatrix:
    """Moment matrix from dual multipliers: H[a,b] = yhat(a^-1 b), yhat(1)=1,
    then PSD projection and renormalization of the identity entry."""
    k = sys.size
    full = np.concatenate([[1.0 + 0j], np.asarray(y_by_gamma, dtype=np.complex128)])
    if full.shape[0] != sys.gamma_keys.shape[0]:
        raise DimensionMismatch("multiplier vector does not match constraint set")
    H = sys.scatter(full)
    H = hermitian_part(H)
    if sys.is_real:
        H = H.real
    H = _psd_project_array(H)
    pos = sys.support.identity_position
    if pos >= 0 and abs(H[pos, pos]) > 1e-12:
        H = H / H[pos, pos].real
    return HermitianMatrix(sys.support, H)


def solve_sdp(sys: GramSystem, opts: SdpOptions = SdpOptions()) -> SdpSolution:
    """Operator-splitting loop on the Gram SDP.

    Each sweep: (i) exact multiplier update through the diagonal normal
    equations of the constraint operator, (ii) PSD projection of the
    dual-adjusted iterate (full eigendecomposition, negative eigenvalues
    clipped), (iii) primal update from the projection gap.  Checkpoints
    evaluate the eigenvalue-slack bound and keep the best iterate, so an
    infeasible or slowly converging run still returns a valid bound.
    """
    t0 = time.monotonic()
    k = sys.size
    dtype = sys.matrix_dtype()
    C = np.eye(k, dtype=dtype)
    b = sys.targets[1:].astype(np.complex128)
    if sys.is_real:
        b = b.real.astype(np.float64)
    counts_nonid = sys.counts[1:].astype(np.float64)

    Q = np.zeros((k, k), dtype=dtype)
    Z = np.zeros((k, k), dtype=dtype)
    mu = float(opts.rho)
    y = np.zeros(b.shape, dtype=dtype)

    best_bound = -np.inf
    best_Q = Q.copy()
    best_lam = 0.0
    Q_prev_check = Q.copy()
    status = "iteration-cap"
    iterations = 0

    for it in range(1, opts.max_iter + 1):
        iterations = it
        Aq = sys.apply(Q)[1:]
        Az = sys.apply(Z)[1:]
        y = ((b - Aq) / mu - Az) / counts_nonid
        V = C - sys.scatter_nonidentity(y) - Q / mu
        V = hermitian_part(V)
        try:
            w, U = np.linalg.eigh(V)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"eigendecomposition failed: {exc}") from exc
        Z = (U * np.clip(w, 0.0, None)) @ U.conj().T
        Q = (U * (mu * np.clip(-w, 0.0, None))) @ U.conj().T
        lam_min_Q = mu * float(max(0.0, -w[-1])) if k else 0.0

        timed_out = opts.time_cap is not None and time.monotonic() - t0 > opts.time_cap
        if it % opts.check_every == 0 or it == opts.max_iter or timed_out:
            bound, resid, _ = sys.bound_parts(Q, lam_min=lam_min_Q)
            resid_max = float(np.max(np.abs(resid))) if resid.size else 0.0
            if bound > best_bound:
                best_bound = bound
                best_Q = Q.copy()
                best_lam = lam_min_Q
            if opts.telemetry is not None:
                opts.telemetry({
                    "iteration": it,
                    "residual_max": resid_max,
                    "lambda_min": lam_min_Q,
                    "bound": bound,
                    "mu": mu,
                })
            if resid_max < opts.tol and lam_min_Q > -opts.tol:
                status = "converged"
                break
            if timed_out:
                status = "time-cap"
                break
            if opts.adaptive_rho:
                dual_move = float(np.linalg.norm(Q - Q_prev_check)) / max(mu, 1e-12)
                if resid_max > 10.0 * (dual_move + 1e-12) and mu < 1e4:
                    mu *= 2.0
                elif dual_move > 10.0 * (resid_max + 1e-12) and mu > 1e-4:
                    mu *= 0.5
            Q_prev_check = Q.copy()

    support = sys.support
    y_moment = -np.asarray(y)
    H = moment_from_duals(sys, y_moment)

    final_bound, final_resid, final_lam = sys.bound_parts(best_Q)
    resid_max = float(np.max(np.abs(final_resid))) if final_resid.size else 0.0
    resid_l1 = float(np.abs(final_resid).sum()) + sys.extra_l1
    return SdpSolution(
        Q=HermitianMatrix(support, best_Q),
        bound=float(final_bound),
        last_Q=HermitianMatrix(support, Q),
        multiplier_keys=sys.gamma_keys[1:],
        multiplier_values=y_moment,
        H=H,
        residual_max=resid_max,
        residual_l1=resid_l1,
        psd_violation=float(max(0.0, -final_lam)),
        iterations=iterations,
        status=status,
        wall_time=time.monotonic() - t0,
    )
