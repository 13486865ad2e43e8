import random

import numpy as np
import pytest

from handoff_sat.cnf import Formula
from handoff_sat.generators import gen_random_3sat
from handoff_sat.gnn import (GnnPolicy, Hyperparameters, PolicyWeights, WeightsFormatError,
                             WeightsVersionError, build_ossp_graph, build_sat_graph, forward, load_weights,
                             random_init, read_weights, save_weights, write_weights, zero_weights)
from handoff_sat.ossp import build_op_graph, gen_taillard_like, lower_bound
from handoff_sat.solver import MdpState, Solver
from oracles import permute_observation

FIG_FORMULA = Formula(4, ((1, 2, -3), (-2, 3, 4)))
SMALL = dict(hidden=8, core_layers=2)


def sat_weights(seed=0, **kw):
    return random_init(Hyperparameters.for_graph("sat", **{**SMALL, **kw}), seed)


def test_fig_graph_shape():
    obs = build_sat_graph(Solver(FIG_FORMULA).extract_mdp_state())
    assert obs.num_nodes == 6 and obs.num_edges == 6
    assert obs.node_features.tolist() == [[1, 0]] * 4 + [[0, 1]] * 2
    labels = {(int(s) + 1, int(r) - 4): tuple(f) for s, r, f in
              zip(obs.senders, obs.receivers, obs.edge_features)}
    assert labels == {(1, 0): (0, 1), (2, 0): (0, 1), (3, 0): (1, 0),
                      (2, 1): (1, 0), (3, 1): (0, 1), (4, 1): (0, 1)}
    assert obs.global_features.tolist() == [0.0]
    assert sorted(obs.actions) == [-4, -3, -2, -1, 1, 2, 3, 4]
    obs.validate()


def test_unit_clause_graph():
    obs = build_sat_graph(MdpState((1,), ((1,),)))
    assert obs.num_nodes == 2 and obs.edge_features.tolist() == [[0, 1]]


def test_reduced_graph_after_assignment():
    s = Solver(FIG_FORMULA)
    s.new_decision(-3)
    obs = build_sat_graph(s.extract_mdp_state())
    assert obs.num_nodes == 3 + 1
    assert obs.num_edges == 2
    assert 3 not in obs.actions and -3 not in obs.actions


def test_ossp_graph_initial_features():
    a = gen_taillard_like(7, 7, 1)
    T = lower_bound(a)
    obs = build_ossp_graph(build_op_graph(a, T))
    assert obs.num_nodes == 49
    expected = np.array([[a.duration(i) / T, 1 / T, 1.0] for i in range(49)])
    assert np.array_equal(obs.node_features, expected)
    assert obs.directed and set(obs.actions) == set(build_op_graph(a, T).edges)
    one = build_ossp_graph(build_op_graph(gen_taillard_like(1, 1, 0), 50))
    assert one.num_nodes == 1 and one.num_edges == 0 and one.actions == []


def test_zero_weights_give_zero_q():
    w = zero_weights(Hyperparameters.for_graph("sat", **SMALL))
    out = forward(build_sat_graph(Solver(FIG_FORMULA).extract_mdp_state()), w)
    assert set(out.q.values()) == {0.0} and out.q_release == 0.0
    assert out.best_action() == 1  # tie -> first action


def test_forward_deterministic_and_masked():
    w = sat_weights(3)
    s = Solver(FIG_FORMULA)
    s.new_decision(2)
    obs = build_sat_graph(s.extract_mdp_state())
    a, b = forward(obs, w), forward(obs, w)
    assert a == b
    assert 2 not in a.q and -2 not in a.q
    assert GnnPolicy(w)(obs) == a


def test_dimension_mismatch():
    w = random_init(Hyperparameters.for_graph("ossp", **SMALL), 0)
    with pytest.raises(ValueError):
        forward(build_sat_graph(Solver(FIG_FORMULA).extract_mdp_state()), w)


@pytest.mark.parametrize("seed", range(10))
def test_permutation_equivariance_sat(seed):
    rng = random.Random(seed)
    f = gen_random_3sat(rng.randint(3, 12), rng.randint(1, 30), seed)
    obs = build_sat_graph(Solver(f).extract_mdp_state())
    w = sat_weights(seed, mlp_depth=rng.randint(1, 2))
    node_perm = list(range(obs.num_nodes))
    edge_perm = list(range(obs.num_edges))
    rng.shuffle(node_perm)
    rng.shuffle(edge_perm)
    base = forward(obs, w)
    moved = forward(permute_observation(obs, node_perm, edge_perm), w)
    for action, value in base.q.items():
        assert moved.q[action] == pytest.approx(value, abs=1e-9)
    assert moved.q_release == pytest.approx(base.q_release, abs=1e-9)


def test_permutation_equivariance_ossp():
    a = gen_taillard_like(3, 3, 2)
    obs = build_ossp_graph(build_op_graph(a, lower_bound(a) + 5))
    w = random_init(Hyperparameters.for_graph("ossp", **SMALL), 1)
    rng = random.Random(1)
    node_perm, edge_perm = list(range(obs.num_nodes)), list(range(obs.num_edges))
    rng.shuffle(node_perm)
    rng.shuffle(edge_perm)
    base = forward(obs, w)
    moved = forward(permute_observation(obs, node_perm, edge_perm), w)
    for action, value in base.q.items():
        assert moved.q[action] == pytest.approx(value, abs=1e-9)


def test_random_init_range_and_determinism():
    h = Hyperparameters.for_graph("sat", hidden=16)
    w = random_init(h, 5)
    assert w == random_init(h, 5)
    assert w != random_init(h, 6)
    for name, t in w.tensors.items():
        fan_in = t.shape[0] if t.ndim == 2 else w.tensors[name[:-1] + "W"].shape[0]
        assert np.all(np.abs(t) < 1 / np.sqrt(fan_in))


def test_hyperparameter_presets():
    d = Hyperparameters.for_graph("sat")
    assert (d.core_layers, d.mlp_depth, d.hidden) == (4, 1, 64)
    x = Hyperparameters.for_graph("sat", extended=True)
    assert (x.core_layers, x.mlp_depth) == (13, 2)
    assert sum(1 for k in x.tensor_shapes() if k.endswith(".edge.0.W") and k.startswith("core")) == 13
    shared = Hyperparameters.for_graph("sat", shared_core=True)
    assert not any(k.startswith("core.1.") for k in shared.tensor_shapes())
    with pytest.raises(ValueError):
        Hyperparameters(core_layers=0)


def test_weights_round_trip(tmp_path):
    w = sat_weights(9, mlp_depth=2)
    assert load_weights(save_weights(w)) == w
    path = tmp_path / "w.gqw"
    write_weights(w, path)
    assert read_weights(path) == w
    assert save_weights(load_weights(save_weights(w))) == save_weights(w)


def test_weights_errors():
    text = save_weights(sat_weights(0))
    lines = text.splitlines()
    with pytest.raises(WeightsFormatError):
        load_weights("\n".join(lines[:-1]))
    with pytest.raises(WeightsFormatError):
        load_weights("\n".join(lines[:-2]))  # a whole tensor missing
    with pytest.raises(WeightsVersionError):
        load_weights("GQW 2\n" + "\n".join(lines[1:]))
    with pytest.raises(WeightsFormatError):
        load_weights("")
    with pytest.raises(WeightsFormatError):
        load_weights(text.replace(lines[3].split()[0], "x", 1))
    bad_shape = dict(sat_weights(0).tensors)
    bad_shape["dec.edge.0.b"] = np.zeros(3)
    with pytest.raises(WeightsFormatError):
        PolicyWeights(Hyperparameters.for_graph("sat", **SMALL), bad_shape)


def test_op_count_linear_in_graph_size():
    w = sat_weights(0)
    counts = []
    for n in (10, 20, 40):
        f = gen_random_3sat(n, 4 * n, n)
        obs = build_sat_graph(Solver(f).extract_mdp_state())
        counts.append((obs.num_nodes + obs.num_edges, forward(obs, w).op_count))
    per = [(c - 2 - 1 - 2) / size for size, c in counts]  # fixed per-call overhead removed
    assert max(per) == pytest.approx(min(per))
