"""CNF formulas and DIMACS I/O.

Literals are plain nonzero ints in DIMACS convention: ``v`` asserts variable
``v`` true, ``-v`` asserts it false.  Variables are 1-indexed here; the solver
converts to its 0-indexed internal encoding with :func:`to_internal`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence


class DimacsError(ValueError):
    """Malformed DIMACS input."""


def negate(lit: int) -> int:
    if lit == 0:
        raise ValueError("0 is not a literal")
    return -lit


def to_internal(lit: int) -> int:
    """DIMACS literal -> ``2*(var-1) + sign`` with sign 1 for negated."""
    return ((abs(lit) - 1) << 1) | (lit < 0)


def to_dimacs(ilit: int) -> int:
    var = (ilit >> 1) + 1
    return -var if ilit & 1 else var


def normalize_clause(lits: Iterable[int]) -> tuple[int, ...] | None:
    """Drop duplicate literals, keep first-occurrence order.

    Returns None for a tautology (contains both ``l`` and ``-l``).
    """
    seen: set[int] = set()
    out = []
    for lit in lits:
        if -lit in seen:
            return None
        if lit not in seen:
            seen.add(lit)
            out.append(lit)
    return tuple(out)


@dataclass(frozen=True)
class Formula:
    num_vars: int
    clauses: tuple[tuple[int, ...], ...]
    # tautological clauses dropped while building; not part of equality
    tautologies_dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.num_vars < 0:
            raise ValueError("num_vars must be nonnegative")
        for clause in self.clauses:
            for lit in clause:
                if lit == 0 or abs(lit) > self.num_vars:
                    raise ValueError(f"literal {lit} out of range 1..{self.num_vars}")

    @classmethod
    def from_clauses(cls, num_vars: int, clauses: Iterable[Sequence[int]]) -> "Formula":
        """Build a formula, deduplicating literals and dropping tautologies."""
        kept = []
        dropped = 0
        for raw in clauses:
            clause = normalize_clause(raw)
            if clause is None:
                dropped += 1
            else:
                kept.append(clause)
        return cls(num_vars, tuple(kept), dropped)

    def __len__(self) -> int:
        return len(self.clauses)

    def evaluate(self, model: Sequence[bool]) -> bool:
        """True iff ``model`` (indexed by var-1) satisfies every clause."""
        return all(any(model[abs(l) - 1] == (l > 0) for l in c) for c in self.clauses)

    def canonical(self) -> tuple:
        """Order-insensitive form used for round-trip comparison."""
        return self.num_vars, tuple(sorted(tuple(sorted(c)) for c in self.clauses))


def parse_dimacs(text: str) -> Formula:
    header = None
    clauses: list[list[int]] = []
    current: list[int] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        tokens = line.split()
        if not tokens or tokens[0].startswith("c"):
            continue
        if tokens[0] == "p":
            if header is not None:
                raise DimacsError(f"line {lineno}: duplicate header")
            if len(tokens) != 4 or tokens[1] != "cnf":
                raise DimacsError(f"line {lineno}: malformed header {line!r}")
            try:
                header = int(tokens[2]), int(tokens[3])
            except ValueError:
                raise DimacsError(f"line {lineno}: malformed header {line!r}") from None
            if header[0] < 0 or header[1] < 0:
                raise DimacsError(f"line {lineno}: negative counts in header")
            continue
        if tokens[0] == "%":
            # SATLIB uf* files end with "%\n0"
            break
        if header is None:
            raise DimacsError(f"line {lineno}: clause before header")
        for tok in tokens:
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"line {lineno}: bad token {tok!r}") from None
            if lit == 0:
                clauses.append(current)
                current = []
            elif abs(lit) > header[0]:
                raise DimacsError(f"line {lineno}: literal {lit} out of range 1..{header[0]}")
            else:
                current.append(lit)
    if header is None:
        raise DimacsError("missing 'p cnf' header")
    if current:
        raise DimacsError("last clause is missing its terminating 0")
    if len(clauses) != header[1]:
        raise DimacsError(f"header declares {header[1]} clauses, found {len(clauses)}")
    return Formula.from_clauses(header[0], clauses)


def write_dimacs(formula: Formula, comments: Iterable[str] = ()) -> str:
    lines = [f"c {c}" for c in comments]
    lines.append(f"p cnf {formula.num_vars} {len(formula.clauses)}")
    lines.extend(" ".join(map(str, c)) + " 0" if c else "0" for c in formula.clauses)
    return "\n".join(lines) + "\n"


def read_dimacs(path) -> Formula:
    with open(path, encoding="ascii") as f:
        return parse_dimacs(f.read())
