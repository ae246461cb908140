"""Error-tolerant lower bounds, subgradient refinement, and certificates.

The central inequality: for ANY Hermitian Q on a support S,

    min_G f  >=  f0 - trace(Q) - sum_{gamma != 1} |ehat(gamma)| + lambda_min(Q)*|S|

where ehat collects the mismatch between f's coefficients and the entry
sums of Q over pairs with that character ratio.  Nothing about Q needs to
be feasible or PSD, which is what makes early termination and certificate
verification cheap: a verifier just recomputes the right-hand side.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import abelian
from .errors import CertificateError, DimensionMismatch, FsosError
from .gfunc import GroupFunction
from .sdp import (GramSystem, HermitianMatrix, SdpOptions, SdpSolution,
                  assemble_gram_system, hermitian_part, solve_sdp)
from .support import SupportSet, select_support

SIGN_TOL = 1e-12
INT_SNAP_EPS = 1e-6
CERTIFICATE_VERSION = 1


@dataclass(frozen=True)
class BoundReport:
    """Result of the eigenvalue-slack bound for one (f, S, Q) triple."""

    bound: float
    e0: float
    residual_keys: np.ndarray = field(repr=False)
    residual_values: np.ndarray = field(repr=False)
    lambda_min: float

    def residuals(self) -> dict:
        return {k: complex(v) for k, v in
                zip(self.residual_keys, self.residual_values)}


def _bound_pieces(sys: GramSystem, Q: np.ndarray):
    bound, resid, lam = sys.bound_parts(Q)
    keys = np.concatenate([sys.gamma_keys[1:], sys.extra_keys])
    vals = np.concatenate([resid.astype(np.complex128),
                           sys.extra_values.astype(np.complex128)])
    return bound, resid, lam, keys, vals


def error_bound(f: GroupFunction, support: SupportSet, Q: HermitianMatrix,
                sys: GramSystem | None = None) -> BoundReport:
    """Lower bound on min f valid for any Hermitian Q indexed by `support`."""
    if Q.support.size != support.size or not np.array_equal(
        np.asarray(Q.support.keys), np.asarray(support.keys)
    ):
        raise DimensionMismatch("Q is indexed by a different support")
    Q.validate(tol=1e-9)
    if sys is None:
        sys = assemble_gram_system(f, support)
    bound, _, lam, keys, vals = _bound_pieces(sys, Q.values)
    return BoundReport(
        bound=float(bound),
        e0=-float(np.trace(Q.values).real),
        residual_keys=keys,
        residual_values=vals,
        lambda_min=float(lam),
    )


def F_value(f: GroupFunction, support: SupportSet, Q: HermitianMatrix,
            sys: GramSystem | None = None) -> float:
    """Objective trace(Q) + ||residual||_1 - lambda_min(Q)|S|; equals
    f0 minus the error_bound."""
    if sys is None:
        sys = assemble_gram_system(f, support)
    bound, _, _ = sys.bound_parts(Q.values)
    return sys.f0 - float(bound)


def F_subgrad(f: GroupFunction, support: SupportSet, Q: HermitianMatrix,
              sys: GramSystem | None = None) -> HermitianMatrix:
    """A subgradient of F at Q (real inner product Re tr(A* B)).

    Identity from the trace term, minus the sign pattern of the residuals
    scattered back onto their pair positions, minus |S| u u* for u the
    bottom eigenvector.  sign(0) is taken as 0 (minimal-norm choice).
    """
    if sys is None:
        sys = assemble_gram_system(f, support)
    G, _, _ = _subgrad_inner(sys, Q.values)
    return HermitianMatrix(support, G)


def _signs(values: np.ndarray) -> np.ndarray:
    mags = np.abs(values)
    out = np.zeros(values.shape, dtype=values.dtype)
    mask = mags > SIGN_TOL
    out[mask] = values[mask] / mags[mask]
    return out


def _subgrad_inner(sys: GramSystem, Q: np.ndarray):
    resid = sys.residual_values(Q)
    try:
        w, U = np.linalg.eigh(Q)
    except np.linalg.LinAlgError as exc:
        raise FsosError(f"eigendecomposition failed: {exc}") from exc
    lam = float(w[0])
    u = U[:, 0]
    k = sys.size
    signs_full = np.concatenate([[0.0 + 0j], _signs(resid.astype(np.complex128))])
    G = np.eye(k, dtype=np.complex128)
    G -= sys.scatter(signs_full)
    G -= k * np.outer(u, u.conj())
    G = hermitian_part(G)
    if sys.is_real:
        G = G.real
    F = sys.f0 - (
        sys.f0 - float(np.trace(Q).real) - float(np.abs(resid).sum())
        - sys.extra_l1 + lam * k
    )
    return G, F, lam


@dataclass(frozen=True)
class RefineResult:
    Q: HermitianMatrix
    bound: float
    F: float
    iterations: int


def refine_bound(f: GroupFunction, support: SupportSet, Q0: HermitianMatrix,
                 max_iter: int = 500, step_c: float | None = None,
                 sys: GramSystem | None = None) -> RefineResult:
    """Projected subgradient descent on F from Q0, keeping the best iterate.

    Steps eta_t = c/sqrt(t); subgradient descent is not monotone, so the
    returned matrix is the iterate with the smallest F seen, never worse
    than Q0 itself.
    """
    if sys is None:
        sys = assemble_gram_system(f, support)
    k = support.size
    vals = Q0.values
    if sys.is_real and np.iscomplexobj(vals):
        vals = vals.real
    Q = np.array(vals, dtype=sys.matrix_dtype(), copy=True)
    Q = hermitian_part(Q)
    if step_c is None:
        norm0 = float(np.linalg.norm(Q))
        step_c = 0.1 * norm0 / (1 + k) if norm0 > 0 else 0.1 / (1 + k)

    best_F = np.inf
    best_Q = Q.copy()
    done = 0
    for t in range(1, max_iter + 1):
        G, F, _ = _subgrad_inner(sys, Q)
        if F < best_F:
            best_F = F
            best_Q = Q.copy()
        Q = hermitian_part(Q - (step_c / math.sqrt(t)) * G)
        done = t
    # include the final iterate
    _, F, _ = _subgrad_inner(sys, Q)
    if F < best_F:
        best_F = F
        best_Q = Q.copy()
    bound = sys.f0 - best_F
    return RefineResult(HermitianMatrix(support, best_Q), float(bound),
                        float(best_F), done)


# -- certificates ------------------------------------------------------------


def function_fingerprint(f: GroupFunction) -> str:
    payload = json.dumps(f.to_json_dict(), sort_keys=True,
                         separators=(",", ":"))
    return "sha256:" + hashlib.sha256(payload.encode()).hexdigest()


@dataclass(frozen=True)
class BoundCertificate:
    """Self-contained, independently checkable record of a claimed bound."""

    function_json: dict
    fingerprint: str
    support: SupportSet
    Q: HermitianMatrix
    lambda_min: float
    e0: float
    residual_keys: np.ndarray = field(repr=False)
    residual_values: np.ndarray = field(repr=False)
    bound: float
    meta: dict

    def bound_from_stored(self) -> float:
        """Re-evaluate the claim from the stored pieces alone (no solve)."""
        return (
            float(np.real(complex(self.function_json_constant())))
            + self.e0
            - float(np.abs(self.residual_values).sum())
            + self.lambda_min * self.support.size
        )

    def function_json_constant(self) -> complex:
        for t in self.function_json["terms"]:
            if all(e == 0 for e in t["exps"]):
                return complex(t["re"], t.get("im", 0.0))
        return 0j

    def function(self) -> GroupFunction:
        return GroupFunction.from_json_dict(self.function_json)

    def to_json_dict(self) -> dict:
        spec = self.support.spec
        q = self.Q.values.astype(np.complex128)
        return {
            "version": CERTIFICATE_VERSION,
            "function": self.function_json,
            "fingerprint": self.fingerprint,
            "support": [list(abelian.dual_of_key(spec, k).exps)
                        for k in self.support.keys],
            "Q": [[float(v.real), float(v.imag)] for v in q.reshape(-1)],
            "lambda_min": float(self.lambda_min),
            "e0": float(self.e0),
            "residual": [
                {"exps": list(abelian.dual_of_key(spec, k).exps),
                 "re": float(v.real), "im": float(v.imag)}
                for k, v in zip(self.residual_keys, self.residual_values)
            ],
            "bound": float(self.bound),
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_json_dict(cls, data: dict) -> "BoundCertificate":
        try:
            if int(data["version"]) != CERTIFICATE_VERSION:
                raise CertificateError(
                    f"unsupported certificate version {data['version']}")
            fjson = data["function"]
            spec = abelian.GroupSpec(tuple(int(d) for d in fjson["orders"]))
            sup_keys = []
            for exps in data["support"]:
                a = abelian.DualIndex(tuple(int(e) for e in exps))
                abelian.validate_dual(spec, a)
                sup_keys.append(abelian.key_of_dual(spec, a))
            support = SupportSet(spec, np.asarray(sup_keys, dtype=spec.key_dtype))
            k = support.size
            qflat = np.asarray([complex(re, im) for re, im in data["Q"]])
            if qflat.shape[0] != k * k:
                raise CertificateError("Q entry count does not match |S|^2")
            Q = HermitianMatrix(support, qflat.reshape(k, k))
            rkeys, rvals = [], []
            for t in data["residual"]:
                a = abelian.DualIndex(tuple(int(e) for e in t["exps"]))
                abelian.validate_dual(spec, a)
                rkeys.append(abelian.key_of_dual(spec, a))
                rvals.append(complex(float(t["re"]), float(t.get("im", 0.0))))
            return cls(
                function_json=fjson,
                fingerprint=str(data["fingerprint"]),
                support=support,
                Q=Q,
                lambda_min=float(data["lambda_min"]),
                e0=float(data["e0"]),
                residual_keys=np.asarray(rkeys, dtype=spec.key_dtype),
                residual_values=np.asarray(rvals, dtype=np.complex128),
                bound=float(data["bound"]),
                meta=dict(data.get("meta", {})),
            )
        except CertificateError:
            raise
        except (KeyError, TypeError, ValueError, FsosError) as exc:
            raise CertificateError(f"malformed certificate: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "BoundCertificate":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CertificateError(f"certificate is not valid JSON: {exc}") from exc
        return cls.from_json_dict(data)


def build_certificate(f: GroupFunction, support: SupportSet,
                      Q: HermitianMatrix, meta: dict | None = None,
                      sys: GramSystem | None = None) -> BoundCertificate:
    """Evaluate the bound for (f, S, Q) and freeze everything into a record."""
    report = error_bound(f, support, Q, sys=sys)
    cert = BoundCertificate(
        function_json=f.to_json_dict(),
        fingerprint=function_fingerprint(f),
        support=support,
        Q=Q,
        lambda_min=report.lambda_min,
        e0=report.e0,
        residual_keys=report.residual_keys,
        residual_values=report.residual_values,
        bound=report.bound,
        meta=meta or {},
    )
    recomputed = cert.bound_from_stored()
    if abs(recomputed - cert.bound) > 1e-9 * max(1.0, abs(cert.bound)):
        raise CertificateError(
            f"emitted certificate violates its invariant: stored bound "
            f"{cert.bound} vs {recomputed} from its own data"
        )
    return cert


@dataclass(frozen=True)
class VerifyResult:
    accepted: bool
    reasons: tuple[str, ...]
    recomputed_bound: float | None

    def __bool__(self) -> bool:
        return self.accepted


def verify_certificate(cert: BoundCertificate | dict | str,
                       f: GroupFunction | None = None,
                       tol: float = 1e-7) -> VerifyResult:
    """Re-derive the bound from the stored (f, S, Q) and accept the claim
    only if the recomputation is at least as strong.

    Stored residuals and lambda_min are NOT trusted; everything numeric is
    recomputed.  Supplying `f` additionally pins the fingerprint.
    """
    reasons: list[str] = []
    try:
        if isinstance(cert, str):
            cert = BoundCertificate.from_json(cert)
        elif isinstance(cert, dict):
            cert = BoundCertificate.from_json_dict(cert)
    except CertificateError as exc:
        return VerifyResult(False, (str(exc),), None)

    try:
        embedded = cert.function()
    except FsosError as exc:
        return VerifyResult(False, (f"embedded function invalid: {exc}",), None)

    if function_fingerprint(embedded) != cert.fingerprint:
        reasons.append("fingerprint does not match embedded function")
    if f is not None:
        if function_fingerprint(f) != cert.fingerprint:
            reasons.append("fingerprint does not match supplied function")
        target = f
    else:
        target = embedded

    try:
        cert.Q.validate(tol=1e-9)
    except FsosError as exc:
        reasons.append(str(exc))
        return VerifyResult(False, tuple(reasons), None)

    if reasons:
        return VerifyResult(False, tuple(reasons), None)

    stored = cert.bound_from_stored()
    if abs(stored - cert.bound) > 1e-7 * max(1.0, abs(cert.bound)):
        reasons.append(
            f"stored residual data re-evaluates to {stored}, not the "
            f"claimed {cert.bound}"
        )

    report = error_bound(target, cert.support, cert.Q)
    if report.bound < cert.bound - tol:
        reasons.append(
            f"claimed bound {cert.bound} exceeds recomputation {report.bound}"
        )
    return VerifyResult(not reasons, tuple(reasons), report.bound)


def integer_lower_bound(bound: float, snap: float = INT_SNAP_EPS) -> int:
    """Valid integer bound for integer-valued functions: ceil with a small
    guard against float fuzz in `bound`."""
    return int(math.ceil(bound - snap))


# -- end-to-end pipeline ------------------------------------------------------


@dataclass(frozen=True)
class PipelineParams:
    """Knobs for the full lower-bound run; None fields are auto-derived."""

    lo: int = 0
    hi: int | None = None       # default: ceil(f0 + sum |nonconstant coeffs|)
    degree: int = 2
    k: int | None = None        # default: 3 * sparsity(f)
    round_support: bool = False  # widen S by degree<=1 characters for rounding
    support: SupportSet | None = None  # bypass selection entirely
    solver: SdpOptions = field(default_factory=SdpOptions)
    refine_iter: int = 500
    step_c: float | None = None
    prefer_low_degree_ties: bool = False
    convolve_cap: int | None = 10**6


@dataclass(frozen=True)
class PipelineResult:
    certificate: BoundCertificate
    bound: float
    support: SupportSet
    system: GramSystem = field(repr=False)
    solution: SdpSolution = field(repr=False)
    refined_Q: HermitianMatrix = field(repr=False)
    timings: dict
    params: PipelineParams

    @property
    def moment_matrix(self) -> HermitianMatrix:
        return self.solution.H


def derive_params(f: GroupFunction, params: PipelineParams) -> PipelineParams:
    hi = params.hi
    if hi is None:
        hi = int(math.ceil(f.constant_term.real + f.l1_nonconstant()))
        hi = max(hi, params.lo + 1)
    k = params.k
    if k is None:
        k = max(1, 3 * f.sparsity)
    return replace(params, hi=hi, k=k)


def run_pipeline(f: GroupFunction, params: PipelineParams = PipelineParams()
                 ) -> PipelineResult:
    """Support selection, SDP solve, subgradient refinement, certificate.

    The claimed bound is the best of the refined bound and the trivial
    l1 bound (Q = 0); the certificate stores whichever matrix achieves it.
    The refined iterate is kept separately for rounding.
    """
    if not f.is_real():
        raise FsosError("lower bounds need a real-valued function")
    params = derive_params(f, params)
    timings: dict[str, float] = {}

    t = time.monotonic()
    if params.support is not None:
        support = params.support
    else:
        support = select_support(
            f, params.lo, params.hi, params.degree, params.k,
            prefer_low_degree_ties=params.prefer_low_degree_ties,
            cap=params.convolve_cap,
        )
    if params.round_support:
        support = support.with_m1()
    timings["select"] = time.monotonic() - t

    t = time.monotonic()
    sys = assemble_gram_system(f, support)
    timings["assemble"] = time.monotonic() - t

    t = time.monotonic()
    sol = solve_sdp(sys, params.solver)
    timings["solve"] = time.monotonic() - t

    t = time.monotonic()
    ref = refine_bound(f, support, sol.Q, max_iter=params.refine_iter,
                       step_c=params.step_c, sys=sys)
    timings["refine"] = time.monotonic() - t

    zero = HermitianMatrix(support, np.zeros((support.size, support.size),
                                             dtype=sys.matrix_dtype()))
    trivial_bound, _, _ = sys.bound_parts(zero.values)
    candidates = [(ref.bound, ref.Q), (float(trivial_bound), zero)]
    best_bound, best_Q = max(candidates, key=lambda c: c[0])

    meta = {
        "solver_iterations": sol.iterations,
        "solver_status": sol.status,
        "refine_iterations": ref.iterations,
        "params": {"l": params.lo, "m": params.hi, "d": params.degree,
                   "k": params.k, "round_support": params.round_support},
        "wall_time": {k_: round(v, 6) for k_, v in timings.items()},
    }
    cert = build_certificate(f, support, best_Q, meta=meta, sys=sys)
    timings["total"] = sum(timings.values())
    return PipelineResult(
        certificate=cert,
        bound=cert.bound,
        support=support,
        system=sys,
        solution=sol,
        refined_Q=ref.Q,
        timings=timings,
        params=params,
    )


def lower_bound(f: GroupFunction, params: PipelineParams = PipelineParams()
                ) -> BoundCertificate:
    """Full pipeline, returning just the certificate."""
    return run_pipeline(f, params).certificate
