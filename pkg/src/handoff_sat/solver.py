"""Conflict-driven clause learning solver.

Two watched literals, 1UIP learning with non-chronological backjumping,
VSIDS branching with phase saving, optional Luby restarts and learned-clause
deletion.  A branching oracle can be plugged in: it is consulted only at
decision points and may hand control back to VSIDS permanently by returning
:data:`RELEASE`.

Internally variables are 0-indexed and a literal is ``2*var + sign`` (sign 1
means negated); everything crossing the public API uses DIMACS ints.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Callable, Optional

from .cnf import Formula, to_dimacs, to_internal
from .rng import SplitMix64

RESCALE_LIMIT = 1e100


class Status(str, Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"
    TIMEOUT = "TIMEOUT"


class _Release:
    def __repr__(self):
        return "RELEASE"


#: Returned by a branching oracle to hand control to VSIDS for the rest of the solve.
RELEASE = _Release()

Oracle = Callable[["Solver"], object]


class OracleError(RuntimeError):
    """The branching oracle broke its contract (e.g. chose an assigned variable)."""


class PendingConflict(RuntimeError):
    pass


def luby(i: int) -> int:
    """i-th element (1-based) of the Luby sequence 1,1,2,1,1,2,4,..."""
    if i < 1:
        raise ValueError("luby index starts at 1")
    while True:
        k = i.bit_length()
        if i == (1 << k) - 1:
            return 1 << (k - 1)
        i -= (1 << (k - 1)) - 1


@dataclass
class SolverConfig:
    restarts: str = "luby"  # "luby" or "off"
    restart_base: int = 100
    var_decay: float = 0.95
    clause_decay: float = 0.999
    clause_deletion: bool = False
    learnt_size_factor: float = 1 / 3
    learnt_size_growth: float = 1.1
    random_phase: bool = False
    seed: int = 0
    debug_checks: bool = False

    def __post_init__(self):
        if not 0.0 < self.var_decay < 1.0:
            raise ValueError("var_decay must be in (0, 1)")
        if self.restarts not in ("luby", "off"):
            raise ValueError(f"restarts must be 'luby' or 'off', got {self.restarts!r}")
        if self.restart_base < 1:
            raise ValueError("restart_base must be positive")


@dataclass
class SolverStats:
    decisions: int = 0
    propagations: int = 0
    conflicts: int = 0
    restarts: int = 0
    oracle_decisions: int = 0
    model_invocations: int = 0
    learned: int = 0
    deleted: int = 0

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class SolveResult:
    status: Status
    model: Optional[tuple[bool, ...]]
    stats: SolverStats

    @property
    def sat(self) -> bool:
        return self.status is Status.SAT


@dataclass(frozen=True)
class MdpState:
    """Unassigned variables plus the not-yet-satisfied clauses restricted to them."""

    variables: tuple[int, ...]
    clauses: tuple[tuple[int, ...], ...]


class Solver:
    def __init__(self, formula: Formula, config: SolverConfig | None = None):
        self.formula = formula
        self.config = config or SolverConfig()
        n = formula.num_vars
        self.num_vars = n
        self.values = [0] * (2 * n)  # per literal: 1 true, -1 false, 0 unassigned
        self.level = [-1] * n
        self.reason = [-1] * n
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.clauses: list[Optional[list[int]]] = []
        self.is_learnt: list[bool] = []
        self.clause_activity: list[float] = []
        self.cla_inc = 1.0
        self.watches: list[list[int]] = [[] for _ in range(2 * n)]
        self.activity = [0.0] * n
        self.var_inc = 1.0
        self.seen = [False] * n
        self.stats = SolverStats()
        self.released = False
        self.ok = True
        self._heap = [(0.0, v) for v in range(n)]
        self._rng = SplitMix64(self.config.seed)
        if self.config.random_phase:
            self.phase = [self._rng.bernoulli(0.5) for _ in range(n)]
        else:
            self.phase = [False] * n
        self.max_learnts = max(len(formula.clauses) * self.config.learnt_size_factor, 100.0)
        self.num_learnts = 0
        for clause in formula.clauses:
            self._add_original([to_internal(l) for l in clause])

    # ---- assignment bookkeeping -------------------------------------------------

    @property
    def decision_level(self) -> int:
        return len(self.trail_lim)

    def value(self, var: int) -> Optional[bool]:
        """Current value of 1-based ``var``: True, False, or None."""
        v = self.values[(var - 1) << 1]
        return None if v == 0 else v == 1

    def lit_value(self, lit: int) -> Optional[bool]:
        v = self.values[to_internal(lit)]
        return None if v == 0 else v == 1

    def unassigned_vars(self) -> list[int]:
        vals = self.values
        return [v + 1 for v in range(self.num_vars) if vals[v << 1] == 0]

    def _enqueue(self, lit: int, reason: int) -> None:
        values = self.values
        values[lit] = 1
        values[lit ^ 1] = -1
        var = lit >> 1
        self.level[var] = len(self.trail_lim)
        self.reason[var] = reason
        self.trail.append(lit)

    def new_decision(self, lit: int) -> None:
        """Open a new decision level and assign DIMACS literal ``lit``."""
        ilit = to_internal(lit)
        if self.values[ilit] != 0:
            raise OracleError(f"decision literal {lit} is already assigned")
        self.trail_lim.append(len(self.trail))
        self._enqueue(ilit, -1)

    def cancel_until(self, level: int) -> None:
        if self.decision_level <= level:
            return
        values, trail, phase = self.values, self.trail, self.phase
        activity, heap = self.activity, self._heap
        stop = self.trail_lim[level]
        for i in range(len(trail) - 1, stop - 1, -1):
            lit = trail[i]
            var = lit >> 1
            values[lit] = 0
            values[lit ^ 1] = 0
            phase[var] = not (lit & 1)
            self.reason[var] = -1
            self.level[var] = -1
            heapq.heappush(heap, (-activity[var], var))
        del trail[stop:]
        del self.trail_lim[level:]
        self.qhead = stop
        if len(heap) > 4 * self.num_vars + 64:
            self._rebuild_heap()

    # ---- clause database --------------------------------------------------------

    def _add_original(self, lits: list[int]) -> None:
        if not self.ok:
            return
        ci = len(self.clauses)
        self.clauses.append(lits)
        self.is_learnt.append(False)
        self.clause_activity.append(0.0)
        if not lits:
            self.ok = False
        elif len(lits) == 1:
            val = self.values[lits[0]]
            if val == -1:
                self.ok = False
            elif val == 0:
                self._enqueue(lits[0], ci)
        else:
            self.watches[lits[0]].append(ci)
            self.watches[lits[1]].append(ci)

    def _add_learnt(self, lits: list[int]) -> int:
        ci = len(self.clauses)
        self.clauses.append(lits)
        self.is_learnt.append(True)
        self.clause_activity.append(self.cla_inc)
        if len(lits) > 1:
            self.watches[lits[0]].append(ci)
            self.watches[lits[1]].append(ci)
        self.num_learnts += 1
        self.stats.learned += 1
        return ci

    def learned_clauses(self) -> list[tuple[int, ...]]:
        return [tuple(to_dimacs(l) for l in c)
                for c, learnt in zip(self.clauses, self.is_learnt) if learnt and c is not None]

    def _reduce_db(self) -> None:
        """Delete the less active half of the unlocked, non-binary learned clauses."""
        locked = {self.reason[l >> 1] for l in self.trail}
        cands = [ci for ci, c in enumerate(self.clauses)
                 if self.is_learnt[ci] and c is not None and len(c) > 2 and ci not in locked]
        cands.sort(key=lambda ci: (self.clause_activity[ci], ci))
        for ci in cands[: len(cands) // 2]:
            self.clauses[ci] = None
            self.num_learnts -= 1
            self.stats.deleted += 1

    # ---- propagation and analysis ----------------------------------------------

    def propagate(self) -> Optional[int]:
        """Run unit propagation to fixpoint; return a conflicting clause index or None."""
        values, watches, clauses, trail = self.values, self.watches, self.clauses, self.trail
        enqueue = self._enqueue
        nprops = 0
        while self.qhead < len(trail):
            false_lit = trail[self.qhead] ^ 1
            self.qhead += 1
            ws = watches[false_lit]
            i = j = 0
            n = len(ws)
            while i < n:
                ci = ws[i]
                i += 1
                c = clauses[ci]
                if c is None:
                    continue
                if c[0] == false_lit:
                    c[0] = c[1]
                    c[1] = false_lit
                first = c[0]
                if values[first] == 1:
                    ws[j] = ci
                    j += 1
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    if values[lk] != -1:
                        c[1] = lk
                        c[k] = false_lit
                        watches[lk].append(ci)
                        break
                else:
                    ws[j] = ci
                    j += 1
                    if values[first] == -1:
                        while i < n:
                            ws[j] = ws[i]
                            j += 1
                            i += 1
                        del ws[j:]
                        self.qhead = len(trail)
                        self.stats.propagations += nprops
                        return ci
                    enqueue(first, ci)
                    nprops += 1
            del ws[j:]
        self.stats.propagations += nprops
        return None

    def _bump_var(self, var: int) -> None:
        act = self.activity
        act[var] += self.var_inc
        if act[var] > RESCALE_LIMIT:
            for v in range(self.num_vars):
                act[v] *= 1e-100
            self.var_inc *= 1e-100
            self._rebuild_heap()
        elif self.values[var << 1] == 0:
            heapq.heappush(self._heap, (-act[var], var))

    def _bump_clause(self, ci: int) -> None:
        self.clause_activity[ci] += self.cla_inc
        if self.clause_activity[ci] > 1e20:
            self.clause_activity = [a * 1e-20 for a in self.clause_activity]
            self.cla_inc *= 1e-20

    def analyze(self, confl: int) -> Optional[tuple[list[int], int]]:
        """1UIP conflict analysis.

        Returns ``(learnt, backjump_level)`` with the asserting literal at
        ``learnt[0]`` (internal encoding), or None when the conflict is at
        level 0 and the formula is UNSAT.
        """
        dl = self.decision_level
        if dl == 0:
            return None
        seen, level, reason, clauses, trail = self.seen, self.level, self.reason, self.clauses, self.trail
        learnt = [-1]
        path = 0
        p = -1
        idx = len(trail) - 1
        while True:
            c = clauses[confl]
            if self.is_learnt[confl]:
                self._bump_clause(confl)
            for q in (c if p == -1 else c[1:]):
                var = q >> 1
                if not seen[var] and level[var] > 0:
                    seen[var] = True
                    self._bump_var(var)
                    if level[var] >= dl:
                        path += 1
                    else:
                        learnt.append(q)
            while not seen[trail[idx] >> 1]:
                idx -= 1
            p = trail[idx]
            idx -= 1
            var = p >> 1
            confl = reason[var]
            seen[var] = False
            path -= 1
            if path == 0:
                break
        learnt[0] = p ^ 1
        for q in learnt[1:]:
            seen[q >> 1] = False
        if len(learnt) == 1:
            return learnt, 0
        best = 1
        for k in range(2, len(learnt)):
            if level[learnt[k] >> 1] > level[learnt[best] >> 1]:
                best = k
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, level[learnt[1] >> 1]

    # ---- branching --------------------------------------------------------------

    def _rebuild_heap(self) -> None:
        act, values = self.activity, self.values
        self._heap = [(-act[v], v) for v in range(self.num_vars) if values[v << 1] == 0]
        heapq.heapify(self._heap)

    def pick_branch_literal(self) -> int:
        """VSIDS: unassigned variable of maximal activity (lowest index on ties), saved phase."""
        heap, act, values = self._heap, self.activity, self.values
        while heap:
            neg, var = heap[0]
            if values[var << 1] == 0 and -neg == act[var]:
                return var + 1 if self.phase[var] else -(var + 1)
            heapq.heappop(heap)
        raise RuntimeError("pick_branch_literal called with every variable assigned")

    def seed_activities(self, scores: dict[int, float]) -> None:
        """Overwrite the activity of each given 1-based variable."""
        for var in scores:
            if not 1 <= var <= self.num_vars:
                raise ValueError(f"unknown variable {var}")
        for var, score in scores.items():
            self.activity[var - 1] = float(score)
        if scores:
            self._rebuild_heap()

    def _decide(self, oracle: Optional[Oracle]) -> int:
        if oracle is not None and not self.released:
            choice = oracle(self)
            if choice is RELEASE:
                self.released = True
            else:
                if not isinstance(choice, int) or choice == 0 or abs(choice) > self.num_vars:
                    raise OracleError(f"oracle returned invalid literal {choice!r}")
                if self.values[to_internal(choice)] != 0:
                    raise OracleError(f"oracle chose literal {choice} over an assigned variable")
                self.stats.oracle_decisions += 1
                return choice
        return self.pick_branch_literal()

    # ---- MDP view ---------------------------------------------------------------

    def extract_mdp_state(self) -> MdpState:
        values = self.values
        reduced = []
        for c in self.clauses:
            if c is None:
                continue
            rest = []
            for l in c:
                v = values[l]
                if v == 1:
                    break
                if v == 0:
                    rest.append(to_dimacs(l))
            else:
                if not rest:
                    raise PendingConflict("a clause is falsified; resolve the conflict first")
                reduced.append(tuple(rest))
        return MdpState(tuple(self.unassigned_vars()), tuple(reduced))

    # ---- checks -----------------------------------------------------------------

    def check_invariants(self) -> None:
        """Assert the trail invariants (used in debug mode and tests)."""
        vars_on_trail = [l >> 1 for l in self.trail]
        assert len(set(vars_on_trail)) == len(vars_on_trail), "variable twice on trail"
        decisions = sum(1 for l in self.trail if self.reason[l >> 1] == -1)
        assert decisions == self.decision_level, "decision count differs from decision level"
        pos = {l: i for i, l in enumerate(self.trail)}
        for i, lit in enumerate(self.trail):
            r = self.reason[lit >> 1]
            if r == -1:
                continue
            c = self.clauses[r]
            assert c is not None and lit in c, "antecedent does not contain implied literal"
            for q in c:
                if q != lit:
                    assert q ^ 1 in pos and pos[q ^ 1] < i, "antecedent not unit under trail prefix"
        for var in range(self.num_vars):
            assigned = self.values[var << 1] != 0
            assert assigned == (self.level[var] >= 0)

    # ---- main loop --------------------------------------------------------------

    def solve(self, oracle: Optional[Oracle] = None, time_limit: Optional[float] = None) -> SolveResult:
        stats = self.stats
        debug = self.config.debug_checks
        if not self.ok:
            return SolveResult(Status.UNSAT, None, stats)
        deadline = None if time_limit is None else time.monotonic() + time_limit
        use_restarts = self.config.restarts == "luby"
        restart_limit = self.config.restart_base * luby(1)
        since_restart = 0
        var_decay, cla_decay = self.config.var_decay, self.config.clause_decay
        tick = 0
        while True:
            tick += 1
            if deadline is not None and tick & 63 == 0 and time.monotonic() > deadline:
                return SolveResult(Status.TIMEOUT, None, stats)
            confl = self.propagate()
            if debug:
                self.check_invariants()
            if confl is not None:
                stats.conflicts += 1
                since_restart += 1
                result = self.analyze(confl)
                if result is None:
                    return SolveResult(Status.UNSAT, None, stats)
                learnt, bt = result
                self.cancel_until(bt)
                ci = self._add_learnt(learnt)
                self._enqueue(learnt[0], ci)
                if debug:
                    assert all(self.values[q] == -1 for q in learnt[1:]), "learned clause not assertive"
                    self.check_invariants()
                self.var_inc /= var_decay
                self.cla_inc /= cla_decay
                if use_restarts and since_restart >= restart_limit:
                    stats.restarts += 1
                    since_restart = 0
                    restart_limit = self.config.restart_base * luby(stats.restarts + 1)
                    self.cancel_until(0)
                if self.config.clause_deletion and self.num_learnts - len(self.trail) >= self.max_learnts:
                    self._reduce_db()
                    self.max_learnts *= self.config.learnt_size_growth
                continue
            if len(self.trail) == self.num_vars:
                model = tuple(self.values[v << 1] == 1 for v in range(self.num_vars))
                return SolveResult(Status.SAT, model, stats)
            lit = self._decide(oracle)
            stats.decisions += 1
            self.new_decision(lit)


def solve(formula: Formula, config: SolverConfig | None = None, oracle: Optional[Oracle] = None,
          time_limit: Optional[float] = None) -> SolveResult:
    return Solver(formula, config).solve(oracle, time_limit)
