"""Seeded instance generators: SR(n) pairs, uniform random 3-SAT, graph coloring."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .cnf import Formula
from .rng import SplitMix64
from .solver import SolverConfig, solve


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SrPair:
    unsat: Formula
    sat: Formula
    n: int


def sr_clause_length(rng: SplitMix64) -> int:
    """1 + Bernoulli(0.7) + Geometric(0.4), the geometric part supported on {1, 2, ...}."""
    return 1 + int(rng.bernoulli(0.7)) + rng.geometric(0.4)


def sr_clause(rng: SplitMix64, n: int) -> tuple[int, ...]:
    k = min(sr_clause_length(rng), n)
    return tuple(v + 1 if rng.bernoulli(0.5) else -(v + 1) for v in rng.sample(n, k))


def _satisfies(model: Sequence[bool], clause: Iterable[int]) -> bool:
    return any(model[abs(l) - 1] == (l > 0) for l in clause)


def gen_sr_pair(n: int, seed: int, max_clauses: Optional[int] = None,
                config: SolverConfig | None = None) -> SrPair:
    """Add SR clauses until the formula turns UNSAT, then flip one literal of the last clause.

    The solver is only re-run when the newest clause falsifies the last model
    found, since otherwise that model still witnesses satisfiability.
    """
    if n < 2:
        raise ValueError("SR(n) needs n >= 2")
    cap = 100 * n if max_clauses is None else max_clauses
    rng = SplitMix64(seed)
    clauses: list[tuple[int, ...]] = []
    model = None
    while True:
        if len(clauses) >= cap:
            raise GenerationError(f"SR({n}) seed {seed}: still satisfiable after {cap} clauses")
        clause = sr_clause(rng, n)
        clauses.append(clause)
        if model is not None and _satisfies(model, clause):
            continue
        result = solve(Formula(n, tuple(clauses)), config)
        if not result.sat:
            break
        model = result.model
    last = clauses[-1]
    flip = rng.randbelow(len(last))
    flipped = last[:flip] + (-last[flip],) + last[flip + 1:]
    return SrPair(Formula(n, tuple(clauses)), Formula(n, tuple(clauses[:-1]) + (flipped,)), n)


def gen_random_3sat(nvars: int, nclauses: int, seed: int) -> Formula:
    if nvars < 3:
        raise ValueError("random 3-SAT needs at least 3 variables")
    rng = SplitMix64(seed)
    clauses = []
    for _ in range(nclauses):
        clauses.append(tuple(v + 1 if rng.bernoulli(0.5) else -(v + 1) for v in rng.sample(nvars, 3)))
    return Formula(nvars, tuple(clauses))


def random_graph(nvertices: int, nedges: int, seed: int) -> list[tuple[int, int]]:
    """Uniform simple graph with exactly ``nedges`` edges, as sorted 0-based pairs."""
    total = nvertices * (nvertices - 1) // 2
    if not 0 <= nedges <= total:
        raise ValueError(f"{nedges} edges do not fit a simple graph on {nvertices} vertices")
    pairs = [(i, j) for i in range(nvertices) for j in range(i + 1, nvertices)]
    rng = SplitMix64(seed)
    return sorted(pairs[k] for k in rng.sample(total, nedges))


def coloring_formula(nvertices: int, edges: Iterable[tuple[int, int]], ncolors: int) -> Formula:
    """Direct encoding; variable ``i*ncolors + c + 1`` means vertex i gets color c.

    Only at-least-one-color and edge-conflict clauses are emitted, so a vertex
    may take several colors in a model.
    """
    if ncolors < 1:
        raise ValueError("need at least one color")
    var = lambda i, c: i * ncolors + c + 1  # noqa: E731
    clauses = [tuple(var(i, c) for c in range(ncolors)) for i in range(nvertices)]
    for i, j in edges:
        for c in range(ncolors):
            clauses.append((-var(i, c), -var(j, c)))
    return Formula(nvertices * ncolors, tuple(clauses))


def gen_coloring(nvertices: int, nedges: int, ncolors: int, seed: int) -> Formula:
    return coloring_formula(nvertices, random_graph(nvertices, nedges, seed), ncolors)
