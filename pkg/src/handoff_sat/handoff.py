"""Branching oracles that let a graph-network policy make the first decisions
and then hand control to VSIDS for good.

Strategies:

* ``vsids``                 never consult the model
* ``fixed:N``               N model decisions, then release
* ``release:min=N,max=M``   model decides; from decision N on, release when the
                            release head outscores every action; release at M
* ``pool:k=K,r=R``          each forward pass queues the top-K actions; at most
                            R passes, then release

Append ``+qact`` to seed VSIDS activities from the last Q-values on release.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Callable, Hashable, Mapping, Optional

from .cnf import Formula
from .gnn import GraphObservation, QOutput, build_ossp_graph, build_sat_graph
from .ossp import CbVarMap, build_op_graph, decided_pairs, derive_windows
from .solver import RELEASE, SolveResult, Solver, SolverConfig

Q_CLAMP = 1e-9
KINDS = ("vsids", "fixed", "release", "pool")


class MixedSignError(ValueError):
    """Per-variable max-Q values straddle zero, so -1/maxQ would reorder them."""


@dataclass(frozen=True)
class Strategy:
    kind: str = "vsids"
    steps: int = 0  # fixed: budget; release: min_steps
    max_steps: Optional[int] = None  # release only; defaults to 2 * steps
    pool_size: int = 1
    model_runs: int = 1
    q_activity: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.steps < 0:
            raise ValueError("step budget must be >= 0")
        if self.pool_size < 1 or self.model_runs < 1:
            raise ValueError("pool size and model runs must be >= 1")
        if self.kind == "release":
            if self.max_steps is None:
                object.__setattr__(self, "max_steps", 2 * self.steps)
            if self.max_steps < self.steps:
                raise ValueError("release max_steps must be >= min_steps")

    @property
    def uses_model(self) -> bool:
        return self.kind != "vsids"

    @property
    def descriptor(self) -> str:
        if self.kind == "vsids":
            return "vsids"
        if self.kind == "fixed":
            base = f"fixed:{self.steps}"
        elif self.kind == "release":
            base = f"release:min={self.steps},max={self.max_steps}"
        else:
            base = f"pool:k={self.pool_size},r={self.model_runs}"
        return base + ("+qact" if self.q_activity else "")

    def __str__(self):
        return self.descriptor

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        raw = text.strip()
        body = raw[: -len("+qact")] if raw.endswith("+qact") else raw
        qact = body != raw
        kind, _, args = body.partition(":")
        opts = {}
        if args and not args.isdigit():
            for item in args.split(","):
                key, sep, val = item.partition("=")
                if not sep or not val.isdigit():
                    raise ValueError(f"bad strategy descriptor {raw!r}")
                opts[key] = int(val)
        if kind == "vsids" and not args and not qact:
            return cls()
        if kind == "fixed" and args.isdigit():
            return cls("fixed", steps=int(args), q_activity=qact)
        if kind == "release" and args.isdigit():
            return cls("release", steps=int(args), q_activity=qact)
        if kind == "release" and "min" in opts and set(opts) <= {"min", "max"}:
            return cls("release", steps=opts["min"], max_steps=opts.get("max"), q_activity=qact)
        if kind == "pool" and set(opts) == {"k", "r"}:
            return cls("pool", pool_size=opts["k"], model_runs=opts["r"], q_activity=qact)
        raise ValueError(f"bad strategy descriptor {raw!r}")


@dataclass
class ControllerStats:
    model_invocations: int = 0
    model_decisions: int = 0
    vsids_decisions: int = 0
    released_at: Optional[int] = None  # 1-based decision index that was handed to VSIDS
    pool_skips: int = 0


# ---- graph environments --------------------------------------------------------------


class SatGraphEnv:
    """Variable-clause graph over the solver's reduced formula; actions are DIMACS literals."""

    kind = "sat"

    def observe(self, solver: Solver) -> GraphObservation:
        return build_sat_graph(solver.extract_mdp_state())

    def literal(self, action) -> int:
        return action

    def is_valid(self, action, solver: Solver) -> bool:
        return solver.value(abs(action)) is None


class OsspGraphEnv:
    """Operation graph of a Crawford-Baker encoded instance; actions are directed edges."""

    kind = "ossp"

    def __init__(self, varmap: CbVarMap):
        self.varmap = varmap
        self.last_graph = None

    def opgraph(self, solver: Solver):
        vm = self.varmap
        windows = derive_windows(vm, solver.value)
        graph = build_op_graph(vm.instance, vm.horizon, decided_pairs(vm, solver.value), windows)
        edges = tuple(e for e in graph.edges if self.is_valid(e, solver))
        return replace(graph, edges=edges)

    def observe(self, solver: Solver) -> GraphObservation:
        self.last_graph = self.opgraph(solver)
        return build_ossp_graph(self.last_graph)

    def literal(self, action) -> int:
        return self.varmap.pr[action]

    def is_valid(self, action, solver: Solver) -> bool:
        i, j = action
        return solver.value(self.varmap.pr[i, j]) is None and solver.value(self.varmap.pr[j, i]) is not True


# ---- Q-activity seeding ----------------------------------------------------------------


def _clamp(m: float) -> float:
    return math.copysign(Q_CLAMP, m) if abs(m) < Q_CLAMP else m


def max_q_per_variable(q: Mapping[Hashable, float], literal_of: Callable = lambda a: a) -> dict[int, float]:
    out: dict[int, float] = {}
    for action, value in q.items():
        var = abs(literal_of(action))
        if var not in out or value > out[var]:
            out[var] = value
    return out


def q_activities(max_q: Mapping[int, float]) -> dict[int, float]:
    """Activity -1 / maxQ, denominator magnitude clamped to >= 1e-9 keeping its sign."""
    return {var: -1.0 / _clamp(m) for var, m in max_q.items()}


def release_to_vsids(solver: Solver, last_q: Optional[QOutput], q_activity: bool,
                     literal_of: Callable = lambda a: a) -> None:
    if not q_activity or last_q is None:
        return
    max_q = max_q_per_variable(last_q.q, literal_of)
    solver.seed_activities({v: a for v, a in q_activities(max_q).items() if solver.value(v) is None})


def _argmax_var(scores: Mapping[int, float]) -> int:
    return min(scores, key=lambda v: (-scores[v], v))


def q_activity_argmax_check(q: QOutput | Mapping[int, float], literal_of: Callable = lambda a: a) -> int:
    """Variable preferred after seeding; raises if seeding would disagree with the Q ranking.

    Accepts a QOutput over literal actions or a ready map variable -> maxQ.
    """
    max_q = max_q_per_variable(q.q, literal_of) if isinstance(q, QOutput) else dict(q)
    if not max_q:
        raise ValueError("no Q-values")
    if any(m < 0 for m in max_q.values()) and any(m >= 0 for m in max_q.values()):
        raise MixedSignError("max-Q values have mixed signs; -1/maxQ does not preserve their order")
    by_activity = _argmax_var(q_activities(max_q))
    by_q = _argmax_var(max_q)
    if by_activity != by_q:
        raise AssertionError(f"seeded argmax x{by_activity} differs from Q argmax x{by_q}")
    return by_q


# ---- controller --------------------------------------------------------------------------


class HandoffController:
    """Branching oracle for :meth:`Solver.solve` implementing a :class:`Strategy`.

    ``policy`` maps a GraphObservation to a QOutput (normally a GnnPolicy).
    """

    def __init__(self, strategy: Strategy, policy: Optional[Callable[[GraphObservation], QOutput]] = None,
                 env=None):
        if strategy.uses_model and policy is None:
            raise ValueError(f"strategy {strategy} needs model weights")
        self.strategy = strategy
        self.policy = policy
        self.env = env if env is not None else SatGraphEnv()
        self.stats = ControllerStats()
        self.pool: deque = deque()
        self.last_q: Optional[QOutput] = None
        self.consults = 0

    def __call__(self, solver: Solver):
        if self.stats.released_at is not None:
            raise RuntimeError("controller consulted after release")
        self.consults += 1
        choice = self.next_decision(solver)
        if choice is RELEASE:
            self.stats.released_at = self.consults
            release_to_vsids(solver, self.last_q, self.strategy.q_activity, self.env.literal)
        else:
            self.stats.model_decisions += 1
        return choice

    def _run_model(self, solver: Solver) -> QOutput:
        q = self.policy(self.env.observe(solver))
        self.stats.model_invocations += 1
        solver.stats.model_invocations += 1
        self.last_q = q
        return q

    def next_decision(self, solver: Solver):
        s = self.strategy
        done = self.stats.model_decisions
        if s.kind == "vsids":
            return RELEASE
        if s.kind == "fixed":
            if done >= s.steps:
                return RELEASE
            q = self._run_model(solver)
            return RELEASE if not q.q else self.env.literal(q.best_action())
        if s.kind == "release":
            if done >= s.max_steps:
                return RELEASE
            q = self._run_model(solver)
            if q.q_release is None:
                raise ValueError("release strategy needs weights with a release head")
            if not q.q:
                return RELEASE
            best = q.best_action()
            if done >= s.steps and q.q_release > q.q[best]:
                return RELEASE
            return self.env.literal(best)
        while True:
            while self.pool:
                action = self.pool.popleft()
                if self.env.is_valid(action, solver):
                    return self.env.literal(action)
                self.stats.pool_skips += 1
            if self.stats.model_invocations >= s.model_runs:
                return RELEASE
            q = self._run_model(solver)
            order = sorted(range(len(q.q)), key=lambda k, vals=list(q.q.values()): (-vals[k], k))
            actions = list(q.q)
            self.pool = deque(actions[k] for k in order[: s.pool_size])
            if not self.pool:
                return RELEASE


def solve_with_strategy(formula: Formula, strategy: Strategy, policy=None, env=None,
                        config: SolverConfig | None = None,
                        time_limit: Optional[float] = None) -> tuple[SolveResult, ControllerStats]:
    controller = HandoffController(strategy, policy, env)
    result = Solver(formula, config).solve(controller, time_limit)
    stats = controller.stats
    stats.vsids_decisions = result.stats.decisions - stats.model_decisions
    return result, stats
