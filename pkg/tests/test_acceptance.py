"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import random
import time

import numpy as np
import pytest

from handoff_sat.bench import CSV_COLUMNS, BenchmarkSpec, Dataset, emit_report, run_records
from handoff_sat.generators import gen_coloring, gen_random_3sat, gen_sr_pair, sr_clause_length
from handoff_sat.gnn import (GnnPolicy, Hyperparameters, QOutput, build_ossp_graph, build_sat_graph, forward,
                             load_weights, random_init, save_weights)
from handoff_sat.handoff import (MixedSignError, OsspGraphEnv, Strategy, q_activity_argmax_check,
                                 release_to_vsids, solve_with_strategy)
from handoff_sat.ossp import (OsspInstance, build_op_graph, decode_schedule, encode_crawford_baker,
                              gen_taillard_like, lower_bound, solve_makespan, validate_schedule)
from handoff_sat.rng import SplitMix64
from handoff_sat.cnf import Formula
from handoff_sat.solver import Solver, SolverConfig, Status, solve
from oracles import optimal_makespan, permute_observation, truth_table_sat

HEADER = ("instance,strategy,trial,status,wall_time_s,decisions,conflicts,propagations,"
          "model_invocations,model_decisions,released_at")


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip())
        assert ok, f"criterion {number} failed: {detail}"
    return emit


def test_1_solver_matches_truth_table(verdict):
    start = time.monotonic()
    rng = random.Random(1)
    formulas = []
    for k in range(500):
        n = rng.randint(5, 20)
        formulas.append(gen_random_3sat(n, round(n * rng.uniform(3.0, 5.5)), k))
    for k in range(250):
        pair = gen_sr_pair(rng.randint(10, 20), 10_000 + k)
        formulas += [pair.unsat, pair.sat]
    bad = 0
    for f in formulas:
        r = solve(f)
        if r.sat != truth_table_sat(f) or (r.sat and not f.evaluate(r.model)):
            bad += 1
    elapsed = time.monotonic() - start
    verdict(1, "solver vs truth table", bad == 0 and len(formulas) >= 1000 and elapsed < 300,
            f"{len(formulas)} formulas, {bad} disagreements, {elapsed:.1f}s")


def test_2_sr_pairs(verdict):
    bad = 0
    for seed in range(100):
        pair = gen_sr_pair(40, seed)
        if solve(pair.unsat).status is not Status.UNSAT or solve(pair.sat).status is not Status.SAT:
            bad += 1
    rng = SplitMix64(2024)
    lengths = [sr_clause_length(rng) for _ in range(10_000)]
    mean = sum(lengths) / len(lengths)
    verdict(2, "SR(40) pairs and clause length", bad == 0 and abs(mean - 4.2) <= 0.1,
            f"{bad}/100 bad pairs, mean length {mean:.4f}")


def check_makespan(instance):
    opt, sched = solve_makespan(instance)
    truth = optimal_makespan([list(r) for r in instance.p])
    f, vm = encode_crawford_baker(instance, opt)
    r = solve(f)
    decodes = r.sat and validate_schedule(decode_schedule(r.model, vm), instance, opt)
    below = opt - 1 < 1 or not solve(encode_crawford_baker(instance, opt - 1)[0]).sat
    return opt == truth and validate_schedule(sched, instance, opt) and decodes and below


def test_3_crawford_baker(verdict):
    results = [check_makespan(gen_taillard_like(2, 2, s)) for s in range(50)]
    results += [check_makespan(gen_taillard_like(3, 3, 100 + s)) for s in range(20)]
    verdict(3, "makespan vs exhaustive oracle", all(results),
            f"{sum(results)}/{len(results)} instances agree")


def test_4_op_graph_shape(verdict):
    failures = []
    for j in range(1, 8):
        for m in range(1, 8):
            inst = gen_taillard_like(j, m, 7 * j + m)
            T = lower_bound(inst)
            g = build_op_graph(inst, T)
            if g.num_vertices != j * m or g.labels() != [(inst.duration(i), 1, T) for i in range(j * m)]:
                failures.append((j, m))
    g77 = build_op_graph(gen_taillard_like(7, 7, 0), 500)
    verdict(4, "operation graph vertices and labels", not failures and g77.num_vertices == 49,
            f"{49 - len(failures)}/49 shapes ok, 7x7 has {g77.num_vertices} vertices")


def random_observation(rng, k):
    if k % 2 == 0:
        f = gen_random_3sat(rng.randint(3, 15), rng.randint(1, 40), k)
        s = Solver(f)
        for _ in range(rng.randint(0, 2)):
            free = s.unassigned_vars()
            if free:
                s.new_decision(rng.choice(free) * rng.choice((1, -1)))
        if s.propagate() is not None:
            s.cancel_until(0)
        return build_sat_graph(s.extract_mdp_state()), "sat"
    inst = gen_taillard_like(rng.randint(1, 4), rng.randint(1, 4), k)
    return build_ossp_graph(build_op_graph(inst, lower_bound(inst) + rng.randint(0, 20))), "ossp"


def test_5_gnn_equivariance(verdict):
    rng = random.Random(5)
    worst, deterministic, round_trip = 0.0, True, True
    for k in range(100):
        obs, kind = random_observation(rng, k)
        hyper = Hyperparameters.for_graph(kind, hidden=rng.choice((8, 16, 32)), core_layers=rng.randint(1, 4),
                                          mlp_depth=rng.randint(1, 2))
        w = random_init(hyper, k)
        node_perm, edge_perm = list(range(obs.num_nodes)), list(range(obs.num_edges))
        rng.shuffle(node_perm)
        rng.shuffle(edge_perm)
        base = forward(obs, w)
        moved = forward(permute_observation(obs, node_perm, edge_perm), w)
        for action, value in base.q.items():
            worst = max(worst, abs(moved.q[action] - value))
        worst = max(worst, abs(moved.q_release - base.q_release))
        again = forward(obs, w)
        deterministic &= again.q == base.q and again.q_release == base.q_release
        round_trip &= load_weights(save_weights(w)) == w
    verdict(5, "GNN equivariance, determinism, weight round trip",
            worst <= 1e-9 and deterministic and round_trip,
            f"max deviation {worst:.2e}, deterministic={deterministic}, round_trip={round_trip}")


def test_6_handoff_budgets(verdict):
    policy = GnnPolicy(random_init(Hyperparameters.for_graph("sat"), 6))
    instances = []
    for seed in range(50):
        pair = gen_sr_pair(50, seed)
        instances += [pair.unsat, pair.sat]
    violations = []
    for idx, f in enumerate(instances):
        for n in (1, 3, 5):
            r, st = solve_with_strategy(f, Strategy("fixed", steps=n), policy)
            release_ok = st.released_at == n + 1 or (st.released_at is None and r.stats.decisions <= n)
            if st.model_invocations > n or not release_ok:
                violations.append((idx, f"fixed:{n}"))
        for k in (20, 30):
            for runs in (1, 2, 3):
                r, st = solve_with_strategy(f, Strategy("pool", pool_size=k, model_runs=runs), policy)
                ok = st.model_invocations <= runs and st.model_decisions <= k * runs
                if st.model_decisions > runs:
                    ok &= st.model_invocations < st.model_decisions
                if not ok:
                    violations.append((idx, f"pool:k={k},r={runs}"))
    verdict(6, "handoff budgets", not violations,
            f"{len(instances)} SR(50) instances x 9 strategies, {len(violations)} violations")


def desk_suite():
    suite = []
    for seed in range(8):
        pair = gen_sr_pair(30, seed)
        suite += [(pair.unsat, None), (pair.sat, None)]
    suite += [(gen_random_3sat(30, 128, s), None) for s in range(8)]
    suite += [(gen_coloring(20, 40, 3, s), None) for s in range(4)]
    for s in range(4):
        inst = gen_taillard_like(2, 2, 300 + s)
        opt = optimal_makespan([list(r) for r in inst.p])
        for T in (opt - 1, opt):
            f, vm = encode_crawford_baker(inst, T)
            suite.append((f, vm))
    return suite


def test_7_strategy_neutrality(verdict):
    strategies = [Strategy.parse(t) for t in ("vsids", "fixed:5", "fixed:5+qact", "release:3",
                                              "pool:k=20,r=2", "pool:k=30,r=3+qact")]
    policies = {kind: GnnPolicy(random_init(Hyperparameters.for_graph(kind, hidden=16), 7))
                for kind in ("sat", "ossp")}
    mismatches, runs = 0, 0
    for f, vm in desk_suite():
        statuses = set()
        for s in strategies:
            for restarts in ("luby", "off"):
                env = OsspGraphEnv(vm) if vm is not None else None
                r, _ = solve_with_strategy(f, s, policies["ossp" if vm else "sat"], env,
                                           SolverConfig(restarts=restarts))
                statuses.add(r.status)
                runs += 1
                if r.sat and not f.evaluate(r.model):
                    mismatches += 1
        mismatches += len(statuses) != 1
    verdict(7, "strategy and restart neutrality", mismatches == 0, f"{runs} runs, {mismatches} mismatches")


def test_8_q_activity_ordering(verdict):
    rng = random.Random(8)
    agree, picks = 0, 0
    for k in range(1000):
        nv = rng.randint(1, 30)
        sign = -1.0 if k % 2 else 1.0
        q = {}
        for v in range(1, nv + 1):
            q[v] = sign * rng.uniform(0.001, 100.0)
            q[-v] = sign * rng.uniform(0.001, 100.0)
        out = QOutput(q)
        best = q_activity_argmax_check(out)
        max_q = {v: max(q[v], q[-v]) for v in range(1, nv + 1)}
        agree += best == max(max_q, key=lambda v: (max_q[v], -v))
        s = Solver(Formula(nv, ()))
        release_to_vsids(s, out, True)
        picks += abs(s.pick_branch_literal()) == best
    flagged = 0
    for k in range(100):
        m = {v: rng.uniform(0.01, 50.0) * (1 if v % 2 else -1) for v in range(1, rng.randint(2, 20) + 1)}
        try:
            q_activity_argmax_check(m)
        except MixedSignError:
            flagged += 1
    verdict(8, "Q-activity ordering", agree == 1000 and picks == 1000 and flagged == 100,
            f"argmax agree {agree}/1000, first pick {picks}/1000, mixed flagged {flagged}/100")


def test_9_harness_determinism(verdict):
    spec = BenchmarkSpec([Dataset.from_gen("sr:30:6:9"), Dataset("ossp-gen", "2x2:2:4")],
                         [Strategy(), Strategy.parse("fixed:3"), Strategy.parse("pool:k=20,r=1+qact")],
                         trials=2, weights_path=None, model_seed=3)
    counts = lambda recs: [(r.instance, r.strategy, r.trial, r.decisions) for r in recs]  # noqa: E731
    first, second = run_records(spec), run_records(spec)
    header = emit_report(first, "csv").splitlines()[0]
    same = counts(first) == counts(second)
    verdict(9, "harness determinism and CSV header", same and header == HEADER == ",".join(CSV_COLUMNS),
            f"{len(first)} records reproduced={same}, header exact={header == HEADER}")
