"""Weighted CNF formulas: DIMACS parsing and arithmetization on C2^n.

A clause over variables x_1..x_n maps to the +-1 cube via tau(False)=+1,
tau(True)=-1, i.e. group coordinate g_i = 1 exactly when x_i is True.  The
characteristic function of a formula evaluates to the total weight of
falsified clauses at every assignment.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .abelian import GroupElement, GroupSpec
from .errors import DimacsError, DimensionMismatch, FsosError
from .gfunc import GroupFunction


@dataclass(frozen=True)
class Clause:
    """Disjunction of literals: positive vars `pos`, negated vars `neg`."""

    pos: frozenset[int]
    neg: frozenset[int]
    weight: int = 1

    def __post_init__(self):
        if self.pos & self.neg:
            raise FsosError(f"clause contains x and not-x: {sorted(self.pos & self.neg)}")
        if not self.pos and not self.neg:
            raise FsosError("empty clause")
        if self.weight < 1:
            raise FsosError(f"clause weight must be >= 1, got {self.weight}")

    @property
    def length(self) -> int:
        return len(self.pos) + len(self.neg)


@dataclass(frozen=True)
class CnfFormula:
    """A weighted CNF formula over variables 1..n_vars."""

    n_vars: int
    clauses: tuple[Clause, ...]

    def __post_init__(self):
        if not self.clauses:
            raise FsosError("formula needs at least one clause")
        for c in self.clauses:
            for v in c.pos | c.neg:
                if not 1 <= v <= self.n_vars:
                    raise FsosError(f"variable {v} out of range [1,{self.n_vars}]")

    @property
    def m(self) -> int:
        return len(self.clauses)

    @cached_property
    def total_weight(self) -> int:
        return sum(c.weight for c in self.clauses)

    @cached_property
    def k(self) -> int:
        return max(c.length for c in self.clauses)


def parse_dimacs(text: str | bytes) -> CnfFormula:
    """Parse DIMACS cnf/wcnf text.

    Accepts comment lines, a 'p cnf n m' or 'p wcnf n m [top]' header, and
    0-terminated clauses (possibly spanning lines).  Duplicate literals in a
    clause are dropped; tautological clauses, out-of-range literals, hard
    wcnf clauses (weight >= top) and clause-count mismatches are errors.
    A legacy trailing '%' section terminates input.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")

    header = None  # (kind, n, m, top)
    tokens: list[tuple[str, int]] = []  # (token, line_no)
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("c"):
            continue
        if stripped.startswith("%"):
            break
        if stripped.startswith("p"):
            if header is not None:
                raise DimacsError("duplicate header", line_no)
            parts = stripped.split()
            if len(parts) < 4 or parts[1] not in ("cnf", "wcnf"):
                raise DimacsError(f"malformed header {stripped!r}", line_no)
            try:
                n, m = int(parts[2]), int(parts[3])
                top = int(parts[4]) if parts[1] == "wcnf" and len(parts) > 4 else None
            except ValueError:
                raise DimacsError(f"malformed header {stripped!r}", line_no)
            if len(parts) > (5 if parts[1] == "wcnf" else 4):
                raise DimacsError(f"malformed header {stripped!r}", line_no)
            if n < 1 or m < 1:
                raise DimacsError("header must declare at least 1 var and 1 clause", line_no)
            header = (parts[1], n, m, top)
            continue
        if header is None:
            raise DimacsError("clause data before header", line_no)
        for tok in stripped.split():
            tokens.append((tok, line_no))

    if header is None:
        raise DimacsError("missing 'p cnf'/'p wcnf' header")
    kind, n_vars, m_declared, top = header

    clauses: list[Clause] = []
    pos: int = 0
    while pos < len(tokens):
        start_line = tokens[pos][1]
        if kind == "wcnf":
            try:
                weight = int(tokens[pos][0])
            except ValueError:
                raise DimacsError(f"expected clause weight, got {tokens[pos][0]!r}", start_line)
            if weight < 1:
                raise DimacsError(f"clause weight must be >= 1, got {weight}", start_line)
            if top is not None and weight >= top:
                raise DimacsError(
                    "hard clauses (weight >= top) are not supported; "
                    "only soft weighted clauses are handled", start_line)
            pos += 1
            if pos >= len(tokens):
                raise DimacsError("weight without clause literals", start_line)
        else:
            weight = 1

        lits: list[int] = []
        terminated = False
        while pos < len(tokens):
            tok, line_no = tokens[pos]
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"bad literal {tok!r}", line_no)
            pos += 1
            if lit == 0:
                terminated = True
                break
            if abs(lit) > n_vars:
                raise DimacsError(f"literal {lit} out of range (n={n_vars})", line_no)
            lits.append(lit)
        if not terminated:
            raise DimacsError("unterminated clause (missing trailing 0)", start_line)
        if not lits:
            raise DimacsError("empty clause", start_line)

        p = frozenset(v for v in lits if v > 0)
        n = frozenset(-v for v in lits if v < 0)
        if p & n:
            raise DimacsError(
                f"tautological clause (x{min(p & n)} with its negation)", start_line)
        clauses.append(Clause(p, n, weight))

    if len(clauses) != m_declared:
        raise DimacsError(
            f"header declares {m_declared} clauses, found {len(clauses)}")
    return CnfFormula(n_vars, tuple(clauses))


def assignment_to_element(phi: CnfFormula, assignment) -> GroupElement:
    """Map a boolean assignment to its cube point (True -> coordinate 1)."""
    if len(assignment) != phi.n_vars:
        raise DimensionMismatch(
            f"assignment length {len(assignment)} != n_vars {phi.n_vars}")
    return GroupElement(tuple(1 if b else 0 for b in assignment))


def count_falsified(phi: CnfFormula, assignment) -> int:
    """Total weight of clauses whose literals are all false."""
    if len(assignment) != phi.n_vars:
        raise DimensionMismatch(
            f"assignment length {len(assignment)} != n_vars {phi.n_vars}")
    total = 0
    for c in phi.clauses:
        if any(assignment[v - 1] for v in c.pos):
            continue
        if any(not assignment[v - 1] for v in c.neg):
            continue
        total += c.weight
    return total


def characteristic_function(phi: CnfFormula) -> GroupFunction:
    """Arithmetize: f(tau(x)) = weighted count of clauses falsified by x.

    Each clause contributes w/2^len * prod_{pos}(1+z_i) * prod_{neg}(1-z_i),
    expanded directly into at most 2^len multilinear terms.
    """
    spec = GroupSpec((2,) * phi.n_vars)
    keys: list = []
    vals: list[float] = []
    for c in phi.clauses:
        signed = [(v, +1.0) for v in sorted(c.pos)] + [(v, -1.0) for v in sorted(c.neg)]
        base = c.weight / (2.0 ** c.length)
        sub_keys = [0]
        sub_coef = [base]
        for v, sgn in signed:
            bit = 1 << (v - 1)
            sub_keys = sub_keys + [k | bit for k in sub_keys]
            sub_coef = sub_coef + [x * sgn for x in sub_coef]
        keys.extend(sub_keys)
        vals.extend(sub_coef)
    if spec.packable:
        keys_arr = np.asarray(keys, dtype=np.int64)
    else:
        keys_arr = np.asarray(keys, dtype=object)
    return GroupFunction.from_pairs(spec, keys_arr, np.asarray(vals, dtype=np.complex128))
