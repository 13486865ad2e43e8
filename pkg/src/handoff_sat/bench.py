"""Benchmark harness: run (instance x strategy x trial) and aggregate time and decision counts."""

from __future__ import annotations

import csv
import io
import os
import time
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

from .cnf import Formula, read_dimacs
from .generators import gen_coloring, gen_random_3sat, gen_sr_pair
from .gnn import GnnPolicy, Hyperparameters, random_init, read_weights
from .handoff import HandoffController, OsspGraphEnv, SatGraphEnv, Strategy
from .ossp import encode_crawford_baker, gen_taillard_like, lower_bound, parse_ossp
from .solver import Solver, SolverConfig, Status

CSV_COLUMNS = ("instance", "strategy", "trial", "status", "wall_time_s", "decisions", "conflicts",
               "propagations", "model_invocations", "model_decisions", "released_at")


class BenchmarkError(RuntimeError):
    pass


@dataclass
class RunRecord:
    dataset: str
    instance: str
    strategy: str
    trial: int
    status: str
    wall_time: float
    decisions: int
    conflicts: int
    propagations: int
    model_invocations: int
    model_decisions: int
    released_at: Optional[int]

    def csv_row(self) -> list:
        return [self.instance, self.strategy, self.trial, self.status, f"{self.wall_time:.6f}",
                self.decisions, self.conflicts, self.propagations, self.model_invocations,
                self.model_decisions, "never" if self.released_at is None else self.released_at]


# ---- datasets ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """One ``--dataset``/``--gen``/``--ossp``/``--ossp-gen`` argument."""

    kind: str  # dir | sr | 3sat | color | ossp | ossp-gen
    arg: str

    @property
    def name(self) -> str:
        return Path(self.arg).name if self.kind in ("dir", "ossp") else f"{self.kind}:{self.arg}"

    @classmethod
    def from_gen(cls, text: str) -> "Dataset":
        kind, _, arg = text.partition(":")
        arity = {"sr": 3, "3sat": 4, "color": 5}
        if kind not in arity or len(arg.split(":")) != arity[kind]:
            raise BenchmarkError(f"bad --gen value {text!r}")
        try:
            [int(x) for x in arg.split(":")]
        except ValueError:
            raise BenchmarkError(f"bad --gen value {text!r}") from None
        return cls(kind, arg)

    def load(self) -> list[tuple[str, object]]:
        """(instance id, Formula or OsspInstance) pairs in a fixed order."""
        nums = [] if self.kind in ("dir", "ossp") else self.arg.replace("x", ":", 1).split(":")
        if self.kind == "dir":
            root = Path(self.arg)
            if not root.is_dir():
                raise BenchmarkError(f"dataset directory {root} is not readable")
            files = sorted(p for p in root.iterdir() if p.suffix in (".cnf", ".dimacs"))
            return [(p.stem, read_dimacs(p)) for p in files]
        if self.kind == "ossp":
            path = Path(self.arg)
            if not path.is_file():
                raise BenchmarkError(f"OSSP file {path} is not readable")
            return [(path.stem, parse_ossp(path.read_text()))]
        vals = [int(x) for x in nums]
        if self.kind == "sr":
            n, count, seed = vals
            out = []
            for k in range(count):
                pair = gen_sr_pair(n, seed + k // 2)
                which = "unsat" if k % 2 == 0 else "sat"
                out.append((f"sr{n}-s{seed + k // 2}-{which}", getattr(pair, which)))
            return out
        if self.kind == "3sat":
            v, c, count, seed = vals
            return [(f"3sat{v}-{c}-s{seed + k}", gen_random_3sat(v, c, seed + k)) for k in range(count)]
        if self.kind == "color":
            v, e, colors, count, seed = vals
            return [(f"color{v}-{e}-{colors}-s{seed + k}", gen_coloring(v, e, colors, seed + k))
                    for k in range(count)]
        if self.kind == "ossp-gen":
            j, m, count, seed = vals
            return [(f"ossp{j}x{m}-s{seed + k}", gen_taillard_like(j, m, seed + k)) for k in range(count)]
        raise BenchmarkError(f"unknown dataset kind {self.kind}")


@dataclass
class BenchmarkSpec:
    datasets: Sequence[Dataset]
    strategies: Sequence[Strategy]
    trials: int = 3
    timeout: float = 60.0
    restarts: bool = True
    weights_path: Optional[str] = None
    model_seed: int = 0
    horizon: str = "probe"  # lb | probe | <int>
    max_probes: int = 64
    jobs: int = 1

    def __post_init__(self):
        if self.horizon not in ("lb", "probe") and not self.horizon.isdigit():
            raise BenchmarkError(f"horizon policy must be lb, probe or an integer, got {self.horizon!r}")

    def solver_config(self) -> SolverConfig:
        return SolverConfig(restarts="luby" if self.restarts else "off")


@lru_cache(maxsize=8)
def _policy(kind: str, weights_path: Optional[str], model_seed: int) -> GnnPolicy:
    if weights_path is None:
        return GnnPolicy(random_init(Hyperparameters.for_graph(kind), model_seed))
    weights = read_weights(weights_path)
    want = Hyperparameters.for_graph(kind)
    got = weights.hyper
    if (got.node_in, got.edge_in, got.global_in) != (want.node_in, want.edge_in, want.global_in):
        raise BenchmarkError(f"weights in {weights_path} do not fit the {kind} graph")
    return GnnPolicy(weights)


def _run_once(formula: Formula, env, strategy: Strategy, spec: BenchmarkSpec):
    policy = _policy(env.kind, spec.weights_path, spec.model_seed) if strategy.uses_model else None
    controller = HandoffController(strategy, policy, env)
    solver = Solver(formula, spec.solver_config())
    t0 = time.monotonic()
    result = solver.solve(controller, spec.timeout)
    elapsed = time.monotonic() - t0
    return result, controller.stats, elapsed


def _record(dataset, instance, strategy, trial, result, cstats, elapsed) -> RunRecord:
    s = result.stats
    return RunRecord(dataset, instance, strategy.descriptor, trial, result.status.value, elapsed,
                     s.decisions, s.conflicts, s.propagations, cstats.model_invocations,
                     cstats.model_decisions, cstats.released_at)


def _run_job(job) -> list[RunRecord]:
    dataset, instance_id, item, strategy, trial, spec = job
    if isinstance(item, Formula):
        result, cstats, elapsed = _run_once(item, SatGraphEnv(), strategy, spec)
        return [_record(dataset, instance_id, strategy, trial, result, cstats, elapsed)]
    lb = lower_bound(item)
    if spec.horizon == "lb":
        horizons = [lb]
    elif spec.horizon == "probe":
        horizons = range(lb, lb + spec.max_probes)
    else:
        horizons = [int(spec.horizon)]
    records = []
    for T in horizons:
        formula, vm = encode_crawford_baker(item, T)
        result, cstats, elapsed = _run_once(formula, OsspGraphEnv(vm), strategy, spec)
        records.append(_record(dataset, f"{instance_id}@T={T}", strategy, trial, result, cstats, elapsed))
        if result.status is not Status.UNSAT:
            break
    return records


def run_records(spec: BenchmarkSpec) -> list[RunRecord]:
    if spec.trials < 1:
        raise BenchmarkError("trials must be >= 1")
    if not spec.strategies:
        raise BenchmarkError("no strategies given")
    jobs = []
    for ds in spec.datasets:
        for instance_id, item in ds.load():
            for strategy in spec.strategies:
                for trial in range(1, spec.trials + 1):
                    jobs.append((ds.name, instance_id, item, strategy, trial, spec))
    if spec.jobs > 1:
        with ProcessPoolExecutor(spec.jobs) as pool:
            chunks = list(pool.map(_run_job, jobs))
    else:
        chunks = [_run_job(job) for job in jobs]
    # job order is fixed by (dataset, instance, strategy, trial), so no re-sort is needed
    return [r for chunk in chunks for r in chunk]


# ---- reporting ---------------------------------------------------------------------------


@dataclass
class ReportRow:
    dataset: str
    strategy: str
    runs: int
    completed: int
    timeouts: int
    mean_time: Optional[float]
    mean_decisions: Optional[float]


@dataclass
class Report:
    rows: list[ReportRow]
    horizon_status: dict[tuple[str, str], list[str]] = field(default_factory=dict)


def aggregate(records: Sequence[RunRecord]) -> Report:
    if not records:
        raise BenchmarkError("no records to report")
    groups: "OrderedDict[tuple[str, str], list[RunRecord]]" = OrderedDict()
    for r in records:
        groups.setdefault((r.dataset, r.strategy), []).append(r)
    rows = []
    for (dataset, strategy), recs in groups.items():
        done = [r for r in recs if r.status != Status.TIMEOUT.value]
        rows.append(ReportRow(
            dataset, strategy, len(recs), len(done), len(recs) - len(done),
            sum(r.wall_time for r in done) / len(done) if done else None,
            sum(r.decisions for r in done) / len(done) if done else None,
        ))
    horizons: dict[tuple[str, str], list[str]] = {}
    for r in records:
        if "@T=" in r.instance:
            statuses = horizons.setdefault((r.dataset, r.instance), [])
            if r.status not in statuses:
                statuses.append(r.status)
    return Report(rows, horizons)


def emit_report(records: Sequence[RunRecord], fmt: str = "table") -> str:
    if not records:
        raise BenchmarkError("no records to report")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow(r.csv_row())
        return buf.getvalue()
    if fmt != "table":
        raise ValueError(f"unknown report format {fmt!r}")
    report = aggregate(records)
    return format_table(report)


def format_table(report: Report) -> str:
    header = ("dataset", "strategy", "runs", "timeouts", "mean_time_s", "mean_decisions")
    body = [(r.dataset, r.strategy, str(r.runs), str(r.timeouts),
             "-" if r.mean_time is None else f"{r.mean_time:.4f}",
             "-" if r.mean_decisions is None else f"{r.mean_decisions:.1f}") for r in report.rows]
    widths = [max(len(row[k]) for row in [header] + body) for k in range(len(header))]
    lines = []
    for row in [header] + body:
        cells = [c.ljust(w) if k < 2 else c.rjust(w) for k, (c, w) in enumerate(zip(row, widths))]
        lines.append("  ".join(cells).rstrip())
    if report.horizon_status:
        lines.append("")
        lines.append("horizon statuses:")
        for (dataset, instance), statuses in report.horizon_status.items():
            lines.append(f"  {dataset}  {instance}  {'/'.join(statuses)}")
    return "\n".join(lines) + "\n"


def run_benchmark(spec: BenchmarkSpec, out_csv: Optional[str] = None) -> tuple[list[RunRecord], Report]:
    records = run_records(spec)
    if out_csv is not None:
        os.makedirs(os.path.dirname(os.path.abspath(out_csv)), exist_ok=True)
        with open(out_csv, "w", encoding="ascii") as f:
            f.write(emit_report(records, "csv"))
    return records, aggregate(records)
