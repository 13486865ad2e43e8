"""Command-line entry point: ``handoff-sat {bench,gen,solve,makespan,init-weights}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import BenchmarkError, BenchmarkSpec, Dataset, format_table, run_benchmark
from .cnf import DimacsError, read_dimacs, write_dimacs
from .gnn import Hyperparameters, WeightsFormatError, random_init, write_weights
from .handoff import Strategy
from .ossp import format_schedule, parse_ossp, solve_makespan
from .solver import SolverConfig, solve


def _add_bench(sub):
    p = sub.add_parser("bench", help="run a strategy matrix and report times and decision counts")
    p.add_argument("--dataset", action="append", default=[], metavar="DIR",
                   help="directory of DIMACS .cnf files")
    p.add_argument("--gen", action="append", default=[],
                   metavar="sr:N:COUNT:SEED | 3sat:V:C:COUNT:SEED | color:V:E:K:COUNT:SEED")
    p.add_argument("--ossp", action="append", default=[], metavar="FILE")
    p.add_argument("--ossp-gen", action="append", default=[], metavar="JxM:COUNT:SEED")
    p.add_argument("--strategy", action="append", default=[], metavar="DESCRIPTOR",
                   help="vsids | fixed:N | release:min=N,max=M | pool:k=K,r=R, optional +qact")
    p.add_argument("--weights", help="GQW weight file (default: random weights from --model-seed)")
    p.add_argument("--model-seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--timeout", type=float, default=60.0, help="seconds per solve")
    p.add_argument("--restarts", choices=("on", "off"), default="on")
    p.add_argument("--horizon", default="probe", help="OSSP horizon policy: lb | probe | <int>")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", help="write per-run CSV here")


def _cmd_bench(args) -> int:
    datasets = [Dataset("dir", d) for d in args.dataset]
    datasets += [Dataset.from_gen(g) for g in args.gen]
    datasets += [Dataset("ossp", f) for f in args.ossp]
    for g in args.ossp_gen:
        shape, _, rest = g.partition(":")
        if "x" not in shape or len(rest.split(":")) != 2:
            raise BenchmarkError(f"bad --ossp-gen value {g!r}")
        datasets.append(Dataset("ossp-gen", g))
    if not datasets:
        raise BenchmarkError("no dataset given")
    strategies = [Strategy.parse(s) for s in (args.strategy or ["vsids"])]
    spec = BenchmarkSpec(datasets, strategies, trials=args.trials, timeout=args.timeout,
                         restarts=args.restarts == "on", weights_path=args.weights,
                         model_seed=args.model_seed, horizon=args.horizon, jobs=args.jobs)
    records, report = run_benchmark(spec, args.out)
    sys.stdout.write(format_table(report))
    return 0


def _cmd_gen(args) -> int:
    ds = Dataset.from_gen(args.gen)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, formula in ds.load():
        comment = f"generator {ds.kind} params {ds.arg} instance {name}"
        (out / f"{name}.cnf").write_text(write_dimacs(formula, [comment]), encoding="ascii")
        print(out / f"{name}.cnf")
    return 0


def _cmd_solve(args) -> int:
    formula = read_dimacs(args.file)
    result = solve(formula, SolverConfig(restarts=args.restarts))
    print(f"s {'SATISFIABLE' if result.sat else 'UNSATISFIABLE'}")
    if result.sat:
        lits = [v + 1 if val else -(v + 1) for v, val in enumerate(result.model)]
        print("v " + " ".join(map(str, lits + [0])))
    for key, val in result.stats.as_dict().items():
        print(f"c {key} {val}")
    return 10 if result.sat else 20


def _cmd_makespan(args) -> int:
    instance = parse_ossp(Path(args.file).read_text())
    best, schedule = solve_makespan(instance, SolverConfig(restarts=args.restarts))
    print(f"c makespan {best}")
    sys.stdout.write(format_schedule(schedule))
    return 0


def _cmd_init_weights(args) -> int:
    hyper = Hyperparameters.for_graph(args.kind, extended=args.extended, hidden=args.hidden)
    write_weights(random_init(hyper, args.seed), args.out)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="handoff-sat")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_bench(sub)
    g = sub.add_parser("gen", help="write generated instances as DIMACS files")
    g.add_argument("--gen", required=True)
    g.add_argument("--outdir", required=True)
    s = sub.add_parser("solve", help="solve one DIMACS file")
    s.add_argument("file")
    s.add_argument("--restarts", choices=("luby", "off"), default="luby")
    m = sub.add_parser("makespan", help="optimal makespan of an OSSP instance file")
    m.add_argument("file")
    m.add_argument("--restarts", choices=("luby", "off"), default="luby")
    w = sub.add_parser("init-weights", help="write randomly initialized policy weights")
    w.add_argument("--kind", choices=("sat", "ossp"), default="sat")
    w.add_argument("--extended", action="store_true", help="13 core layers of depth 2")
    w.add_argument("--hidden", type=int, default=64)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    handlers = {"bench": _cmd_bench, "gen": _cmd_gen, "solve": _cmd_solve,
                "makespan": _cmd_makespan, "init-weights": _cmd_init_weights}
    try:
        return handlers[args.command](args)
    except (BenchmarkError, DimacsError, WeightsFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
