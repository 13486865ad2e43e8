"""Open shop scheduling: instances, Crawford-Baker CNF encoding, decoding,
makespan search and the compact operation graph.

Operations are numbered ``op = job * m + machine``.  Time is 0-based:
``sa[i, t]`` (t in 0..T) means "op i starts at t or later", ``eb[i, t]``
(t in 1..T) means "op i has ended by t".  The operation-graph labels shift
the earliest start by one so a fresh state reads ``(p_i, 1, T)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

from .cnf import Formula
from .rng import SplitMix64
from .solver import SolverConfig, solve

OperationId = tuple[int, int]  # (job, machine)


@dataclass(frozen=True)
class OsspInstance:
    p: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.p or not self.p[0]:
            raise ValueError("instance needs at least one job and one machine")
        width = len(self.p[0])
        for row in self.p:
            if len(row) != width:
                raise ValueError("processing-time matrix is ragged")
            if any(x < 1 for x in row):
                raise ValueError("processing times must be >= 1")

    @classmethod
    def from_rows(cls, rows) -> "OsspInstance":
        return cls(tuple(tuple(int(x) for x in r) for r in rows))

    @property
    def jobs(self) -> int:
        return len(self.p)

    @property
    def machines(self) -> int:
        return len(self.p[0])

    @property
    def num_ops(self) -> int:
        return self.jobs * self.machines

    def op(self, job: int, machine: int) -> int:
        return job * self.machines + machine

    def op_id(self, op: int) -> OperationId:
        return divmod(op, self.machines)

    def duration(self, op: int) -> int:
        job, machine = divmod(op, self.machines)
        return self.p[job][machine]

    def conflicting(self, a: int, b: int) -> bool:
        """Distinct ops that share a job or a machine and so cannot overlap."""
        if a == b:
            return False
        ja, ma = divmod(a, self.machines)
        jb, mb = divmod(b, self.machines)
        return ja == jb or ma == mb

    def conflict_pairs(self) -> list[tuple[int, int]]:
        """Ordered pairs (i, j), i != j, of conflicting operations."""
        n = self.num_ops
        return [(a, b) for a in range(n) for b in range(n) if self.conflicting(a, b)]


def parse_ossp(text: str) -> OsspInstance:
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("OSSP file needs a 'j m' header")
    j, m = int(tokens[0]), int(tokens[1])
    body = [int(t) for t in tokens[2:]]
    if len(body) != j * m:
        raise ValueError(f"expected {j * m} processing times, found {len(body)}")
    return OsspInstance.from_rows(body[r * m:(r + 1) * m] for r in range(j))


def write_ossp(instance: OsspInstance) -> str:
    lines = [f"{instance.jobs} {instance.machines}"]
    lines.extend(" ".join(map(str, row)) for row in instance.p)
    return "\n".join(lines) + "\n"


def gen_taillard_like(jobs: int, machines: int, seed: int) -> OsspInstance:
    """Processing times uniform on [1, 99]; same distribution as Taillard's set, not the same stream."""
    if jobs < 1 or machines < 1:
        raise ValueError("need j >= 1 and m >= 1")
    rng = SplitMix64(seed)
    return OsspInstance.from_rows([[rng.randint(1, 99) for _ in range(machines)] for _ in range(jobs)])


def lower_bound(instance: OsspInstance) -> int:
    rows = [sum(r) for r in instance.p]
    cols = [sum(r[k] for r in instance.p) for k in range(instance.machines)]
    return max(rows + cols)


def upper_bound(instance: OsspInstance) -> int:
    return sum(sum(r) for r in instance.p)


# ---- Crawford-Baker encoding -----------------------------------------------------


@dataclass(frozen=True)
class CbVarMap:
    instance: OsspInstance
    horizon: int
    num_vars: int
    pr: Mapping[tuple[int, int], int]

    # sa[i, t] for t in 0..T, then eb[i, t] for t in 1..T, per op; pr afterwards.
    def sa(self, op: int, t: int) -> int:
        if not 0 <= t <= self.horizon:
            raise KeyError(f"sa time {t} outside 0..{self.horizon}")
        return op * (2 * self.horizon + 1) + t + 1

    def eb(self, op: int, t: int) -> int:
        if not 1 <= t <= self.horizon:
            raise KeyError(f"eb time {t} outside 1..{self.horizon}")
        return op * (2 * self.horizon + 1) + self.horizon + t + 1

    def decode_var(self, var: int):
        """Inverse lookup: ('sa'|'eb', op, t) or ('pr', i, j)."""
        block = 2 * self.horizon + 1
        if var <= self.instance.num_ops * block:
            op, r = divmod(var - 1, block)
            return ("sa", op, r) if r <= self.horizon else ("eb", op, r - self.horizon)
        for pair, v in self.pr.items():
            if v == var:
                return ("pr",) + pair
        raise KeyError(var)

    def pr_pair(self, var: int) -> Optional[tuple[int, int]]:
        inv = self.__dict__.get("_pr_inv")
        if inv is None:
            inv = {v: k for k, v in self.pr.items()}
            object.__setattr__(self, "_pr_inv", inv)
        return inv.get(var)


def encode_crawford_baker(instance: OsspInstance, horizon: int) -> tuple[Formula, CbVarMap]:
    """CNF that is satisfiable iff a schedule with makespan <= ``horizon`` exists."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    T = horizon
    nops = instance.num_ops
    base = nops * (2 * T + 1)
    pairs = instance.conflict_pairs()
    pr = {pair: base + k + 1 for k, pair in enumerate(pairs)}
    vm = CbVarMap(instance, T, base + len(pairs), pr)
    sa, eb = vm.sa, vm.eb
    clauses: list[tuple[int, ...]] = []
    add = clauses.append
    for i in range(nops):
        p = instance.duration(i)
        add(tuple(sa(i, t) for t in range(T + 1)))
        add(tuple(eb(i, t) for t in range(1, T + 1)))
        for t in range(1, T + 1):
            add((-sa(i, t), sa(i, t - 1)))
        for t in range(1, T):
            add((-eb(i, t), eb(i, t + 1)))
        for t in range(T + 1):
            if 1 <= t + p - 1 <= T:
                add((-sa(i, t), -eb(i, t + p - 1)))
        # the op must finish by T
        for t in range(max(0, T - p + 1), T + 1):
            add((-sa(i, t),))
    for i, j in pairs:
        if i < j:
            add((pr[i, j], pr[j, i]))
    for (i, j), v in pr.items():
        p = instance.duration(i)
        for t in range(0, T - p + 1):
            add((-sa(i, t), -v, sa(j, t + p)))
    return Formula(vm.num_vars, tuple(clauses)), vm


# ---- schedules --------------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    start: Mapping[OperationId, int]

    def makespan(self, instance: OsspInstance) -> int:
        return max((s + instance.p[j][m] for (j, m), s in self.start.items()), default=0)


def decode_schedule(model, varmap: CbVarMap) -> Schedule:
    """Start of each op is the greatest t with sa[i, t] true."""
    inst, T = varmap.instance, varmap.horizon
    start = {}
    for i in range(inst.num_ops):
        ts = [t for t in range(T + 1) if model[varmap.sa(i, t) - 1]]
        if not ts:
            raise ValueError(f"model has no start time for operation {inst.op_id(i)}")
        start[inst.op_id(i)] = max(ts)
    return Schedule(start)


def validate_schedule(schedule: Schedule, instance: OsspInstance, horizon: int) -> bool:
    if set(schedule.start) != {(j, m) for j in range(instance.jobs) for m in range(instance.machines)}:
        return False
    intervals = {}
    for (j, m), s in schedule.start.items():
        if s < 0 or s + instance.p[j][m] > horizon:
            return False
        intervals[j, m] = (s, s + instance.p[j][m])
    for a, (sa_, ea) in intervals.items():
        for b, (sb, eb_) in intervals.items():
            if a < b and (a[0] == b[0] or a[1] == b[1]) and sa_ < eb_ and sb < ea:
                return False
    return True


def format_schedule(schedule: Schedule) -> str:
    return "".join(f"{j} {m} {s}\n" for (j, m), s in sorted(schedule.start.items()))


def solve_horizon(instance: OsspInstance, horizon: int, config: SolverConfig | None = None,
                  oracle=None) -> Optional[Schedule]:
    formula, vm = encode_crawford_baker(instance, horizon)
    result = solve(formula, config, oracle)
    return decode_schedule(result.model, vm) if result.sat else None


def solve_makespan(instance: OsspInstance, config: SolverConfig | None = None) -> tuple[int, Schedule]:
    """Binary search for the least feasible horizon in [lower_bound, sum of all p]."""
    lo, hi = lower_bound(instance), upper_bound(instance)
    best = solve_horizon(instance, hi, config)
    if best is None:
        raise RuntimeError("fully sequential horizon reported UNSAT")
    while lo < hi:
        mid = (lo + hi) // 2
        sched = solve_horizon(instance, mid, config)
        if sched is None:
            lo = mid + 1
        else:
            hi, best = mid, sched
    return hi, best


# ---- operation graph ---------------------------------------------------------------


@dataclass(frozen=True)
class OpGraph:
    """Operation-level graph.

    ``est``/``lct`` are internal 0-based earliest start and latest completion;
    :meth:`labels` gives the reporting form ``(p, est + 1, lct)``.
    """

    instance: OsspInstance
    horizon: int
    est: tuple[int, ...]
    lct: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    infeasible: tuple[bool, ...] = field(default=())

    @property
    def num_vertices(self) -> int:
        return len(self.est)

    def labels(self) -> list[tuple[int, int, int]]:
        return [(self.instance.duration(i), self.est[i] + 1, self.lct[i]) for i in range(self.num_vertices)]


def default_windows(instance: OsspInstance, horizon: int) -> dict[int, tuple[int, int]]:
    return {i: (0, horizon) for i in range(instance.num_ops)}


def build_op_graph(instance: OsspInstance, horizon: int,
                   decided: Iterable[tuple[int, int]] = (),
                   windows: Optional[Mapping[int, tuple[int, int]]] = None) -> OpGraph:
    """Edge (i, j) means "i before j" is still an open, window-feasible choice."""
    windows = default_windows(instance, horizon) if windows is None else windows
    decided = set(decided)
    n = instance.num_ops
    est = tuple(windows[i][0] for i in range(n))
    lct = tuple(windows[i][1] for i in range(n))
    dur = [instance.duration(i) for i in range(n)]
    edges = []
    for i, j in instance.conflict_pairs():
        if (i, j) in decided or (j, i) in decided:
            continue
        if est[i] + dur[i] + dur[j] <= lct[j]:
            edges.append((i, j))
    infeasible = tuple(est[i] + dur[i] > lct[i] for i in range(n))
    return OpGraph(instance, horizon, est, lct, tuple(edges), infeasible)


def derive_windows(varmap: CbVarMap, value: Callable[[int], Optional[bool]]) -> dict[int, tuple[int, int]]:
    """Windows from a partial assignment; ``value(var)`` gives True/False/None.

    est = greatest t with sa[i, t] true (0 if none); lct = least t with
    eb[i, t] true (T if none).
    """
    T = varmap.horizon
    out = {}
    for i in range(varmap.instance.num_ops):
        est = 0
        for t in range(T, 0, -1):
            if value(varmap.sa(i, t)) is True:
                est = t
                break
        lct = T
        for t in range(1, T + 1):
            if value(varmap.eb(i, t)) is True:
                lct = t
                break
        out[i] = (est, lct)
    return out


def decided_pairs(varmap: CbVarMap, value: Callable[[int], Optional[bool]]) -> set[tuple[int, int]]:
    return {pair for pair, var in varmap.pr.items() if value(var) is True}


def apply_edge_action(edge: tuple[int, int], varmap: CbVarMap) -> int:
    """Positive literal of pr[i, j] for the edge i -> j."""
    try:
        return varmap.pr[edge]
    except KeyError:
        raise KeyError(f"operations {edge} do not conflict; no precedence variable") from None
