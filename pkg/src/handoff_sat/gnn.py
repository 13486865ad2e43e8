"""Encoder-core-decoder graph network producing Q-values over branching actions.

Per core layer, edges are updated first from (u, e, v_sender, v_receiver),
then nodes from (u, v, mean of incident edges), then the global vector from
(u, mean of edges, mean of nodes).  Aggregations are arithmetic means so the
output is equivariant under any relabeling of nodes and edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Optional

import numpy as np

from .ossp import OpGraph
from .rng import SplitMix64
from .solver import MdpState

WEIGHTS_MAGIC = "GQW"
WEIGHTS_VERSION = 1


class WeightsFormatError(ValueError):
    pass


class WeightsVersionError(WeightsFormatError):
    pass


# ---- observations -------------------------------------------------------------------


@dataclass
class GraphObservation:
    node_features: np.ndarray  # (N, node_in)
    senders: np.ndarray  # (E,)
    receivers: np.ndarray  # (E,)
    edge_features: np.ndarray  # (E, edge_in)
    global_features: np.ndarray  # (global_in,)
    directed: bool
    # action id -> ("node", node index, output column) or ("edge", edge index, 0)
    action_index: dict[Hashable, tuple[str, int, int]] = field(default_factory=dict)

    @property
    def num_nodes(self) -> int:
        return self.node_features.shape[0]

    @property
    def num_edges(self) -> int:
        return self.senders.shape[0]

    @property
    def actions(self) -> list:
        return list(self.action_index)

    def validate(self) -> None:
        n = self.num_nodes
        if self.num_edges and (self.senders.min() < 0 or self.receivers.min() < 0
                               or self.senders.max() >= n or self.receivers.max() >= n):
            raise ValueError("edge endpoint out of range")


def build_sat_graph(state: MdpState) -> GraphObservation:
    """Variable-clause graph of the reduced formula.

    Edge feature [0, 1] marks a positive occurrence and [1, 0] a negated one.
    Action ``+v`` scores in column 0 of v's node and ``-v`` in column 1.
    """
    var_node = {v: k for k, v in enumerate(state.variables)}
    nv, nc = len(state.variables), len(state.clauses)
    nodes = np.zeros((nv + nc, 2))
    nodes[:nv, 0] = 1.0
    nodes[nv:, 1] = 1.0
    senders, receivers, feats = [], [], []
    for ci, clause in enumerate(state.clauses):
        for lit in clause:
            senders.append(var_node[abs(lit)])
            receivers.append(nv + ci)
            feats.append((0.0, 1.0) if lit > 0 else (1.0, 0.0))
    actions = {}
    for v in state.variables:
        actions[v] = ("node", var_node[v], 0)
        actions[-v] = ("node", var_node[v], 1)
    return GraphObservation(
        nodes,
        np.asarray(senders, dtype=np.int64),
        np.asarray(receivers, dtype=np.int64),
        np.asarray(feats, dtype=float).reshape(-1, 2),
        np.zeros(1),
        directed=False,
        action_index=actions,
    )


def build_ossp_graph(graph: OpGraph) -> GraphObservation:
    """Operation graph: node features (p, est label, lct) / T, one directed edge per open precedence."""
    T = float(graph.horizon)
    nodes = np.array([[p / T, est / T, lct / T] for p, est, lct in graph.labels()], dtype=float)
    senders = np.asarray([i for i, _ in graph.edges], dtype=np.int64)
    receivers = np.asarray([j for _, j in graph.edges], dtype=np.int64)
    return GraphObservation(
        nodes.reshape(-1, 3),
        senders,
        receivers,
        np.ones((len(graph.edges), 1)),
        np.zeros(1),
        directed=True,
        action_index={edge: ("edge", k, 0) for k, edge in enumerate(graph.edges)},
    )


# ---- weights --------------------------------------------------------------------------


@dataclass(frozen=True)
class Hyperparameters:
    node_in: int = 2
    edge_in: int = 2
    global_in: int = 1
    hidden: int = 64
    core_layers: int = 4
    mlp_depth: int = 1
    enc_depth: int = 1
    dec_depth: int = 1
    shared_core: bool = False
    release_head: bool = True

    def __post_init__(self):
        for name in ("node_in", "edge_in", "global_in", "hidden", "core_layers",
                     "mlp_depth", "enc_depth", "dec_depth"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @classmethod
    def for_graph(cls, kind: str, extended: bool = False, **overrides) -> "Hyperparameters":
        """Defaults for ``kind`` in {"sat", "ossp"}; ``extended`` is the 13-layer, depth-2 core."""
        dims = {"sat": (2, 2, 1), "ossp": (3, 1, 1)}[kind]
        base = dict(node_in=dims[0], edge_in=dims[1], global_in=dims[2])
        if extended:
            base.update(core_layers=13, mlp_depth=2)
        base.update(overrides)
        return cls(**base)

    def to_line(self) -> str:
        return " ".join(f"{k}={int(v)}" for k, v in self.__dict__.items())

    @classmethod
    def from_line(cls, line: str) -> "Hyperparameters":
        kw = {}
        for tok in line.split():
            key, _, val = tok.partition("=")
            if key not in cls.__dataclass_fields__ or not val:
                raise WeightsFormatError(f"bad hyperparameter token {tok!r}")
            kw[key] = bool(int(val)) if key in ("shared_core", "release_head") else int(val)
        return cls(**kw)

    def tensor_shapes(self) -> dict[str, tuple[int, ...]]:
        """Name -> shape for every parameter, in canonical order."""
        H = self.hidden
        shapes: dict[str, tuple[int, ...]] = {}

        def mlp(prefix, dims):
            for k, (a, b) in enumerate(zip(dims, dims[1:])):
                shapes[f"{prefix}.{k}.W"] = (a, b)
                shapes[f"{prefix}.{k}.b"] = (b,)

        for role, d in (("node", self.node_in), ("edge", self.edge_in), ("global", self.global_in)):
            mlp(f"enc.{role}", [d] + [H] * self.enc_depth)
        for layer in range(1 if self.shared_core else self.core_layers):
            tail = [H] * self.mlp_depth
            mlp(f"core.{layer}.edge", [4 * H] + tail)
            mlp(f"core.{layer}.node", [3 * H] + tail)
            mlp(f"core.{layer}.global", [3 * H] + tail)
        mlp("dec.node", [H] * self.dec_depth + [2])
        mlp("dec.edge", [H] * self.dec_depth + [1])
        if self.release_head:
            mlp("release", [H, H, 1])
        return shapes


@dataclass
class PolicyWeights:
    hyper: Hyperparameters
    tensors: dict[str, np.ndarray]

    def __post_init__(self):
        expected = self.hyper.tensor_shapes()
        if set(expected) != set(self.tensors):
            missing = sorted(set(expected) - set(self.tensors))
            extra = sorted(set(self.tensors) - set(expected))
            raise WeightsFormatError(f"tensor names mismatch: missing {missing}, unexpected {extra}")
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise WeightsFormatError(f"{name}: shape {self.tensors[name].shape}, expected {shape}")

    def __eq__(self, other):
        if not isinstance(other, PolicyWeights):
            return NotImplemented
        return self.hyper == other.hyper and all(
            np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors)


def random_init(hyper: Hyperparameters, seed: int) -> PolicyWeights:
    """Each entry uniform in (-s, s), s = 1/sqrt(fan_in), drawn from SplitMix64 in canonical order."""
    rng = SplitMix64(seed)
    shapes = hyper.tensor_shapes()
    tensors = {}
    for name, shape in shapes.items():
        fan_in = shape[0] if len(shape) == 2 else shapes[name[:-1] + "W"][0]
        s = 1.0 / math.sqrt(fan_in)
        flat = [rng.uniform(-s, s) for _ in range(math.prod(shape))]
        tensors[name] = np.array(flat, dtype=float).reshape(shape)
    return PolicyWeights(hyper, tensors)


def zero_weights(hyper: Hyperparameters) -> PolicyWeights:
    return PolicyWeights(hyper, {k: np.zeros(s) for k, s in hyper.tensor_shapes().items()})


def save_weights(weights: PolicyWeights) -> str:
    lines = [f"{WEIGHTS_MAGIC} {WEIGHTS_VERSION}", weights.hyper.to_line()]
    for name in weights.hyper.tensor_shapes():
        t = weights.tensors[name]
        lines.append(f"{name} {' '.join(map(str, t.shape))}")
        lines.append(" ".join(repr(float(x)) for x in t.ravel()))
    return "\n".join(lines) + "\n"


def load_weights(text: str) -> PolicyWeights:
    lines = text.splitlines()
    if not lines:
        raise WeightsFormatError("empty weights stream")
    head = lines[0].split()
    if len(head) != 2 or head[0] != WEIGHTS_MAGIC:
        raise WeightsFormatError(f"bad header {lines[0]!r}")
    if head[1] != str(WEIGHTS_VERSION):
        raise WeightsVersionError(f"unsupported weights version {head[1]}, expected {WEIGHTS_VERSION}")
    if len(lines) < 2:
        raise WeightsFormatError("missing hyperparameter line")
    try:
        hyper = Hyperparameters.from_line(lines[1])
    except (TypeError, ValueError) as exc:
        raise WeightsFormatError(f"bad hyperparameters: {exc}") from None
    body = lines[2:]
    if len(body) % 2:
        raise WeightsFormatError("truncated weights stream")
    tensors = {}
    for k in range(0, len(body), 2):
        parts = body[k].split()
        if not parts:
            raise WeightsFormatError(f"empty tensor header at line {k + 3}")
        name = parts[0]
        try:
            shape = tuple(int(d) for d in parts[1:])
            values = [float(x) for x in body[k + 1].split()]
        except ValueError:
            raise WeightsFormatError(f"{name}: unparsable tensor data") from None
        if len(values) != math.prod(shape):
            raise WeightsFormatError(f"{name}: {len(values)} values for shape {shape}")
        tensors[name] = np.array(values, dtype=float).reshape(shape)
    return PolicyWeights(hyper, tensors)


def read_weights(path) -> PolicyWeights:
    with open(path, encoding="ascii") as f:
        return load_weights(f.read())


def write_weights(weights: PolicyWeights, path) -> None:
    with open(path, "w", encoding="ascii") as f:
        f.write(save_weights(weights))


# ---- forward pass -----------------------------------------------------------------------


@dataclass
class QOutput:
    q: dict[Hashable, float]
    q_release: Optional[float] = None
    op_count: int = 0  # rows pushed through any layer; grows linearly with |V| + |E|

    def best_action(self):
        """Argmax over actions; ties go to the earliest action in observation order."""
        best, best_q = None, -math.inf
        for action, value in self.q.items():
            if value > best_q:
                best, best_q = action, value
        return best


def _mlp(x, tensors, prefix, depth, final_relu=True):
    for k in range(depth):
        x = x @ tensors[f"{prefix}.{k}.W"] + tensors[f"{prefix}.{k}.b"]
        if final_relu or k < depth - 1:
            x = np.maximum(x, 0.0)
    return x


def _segment_mean(values, index, size):
    out = np.zeros((size, values.shape[1]))
    np.add.at(out, index, values)
    counts = np.bincount(index, minlength=size).astype(float)
    nz = counts > 0
    out[nz] /= counts[nz, None]
    return out


def forward(obs: GraphObservation, weights: PolicyWeights) -> QOutput:
    h = weights.hyper
    t = weights.tensors
    if obs.node_features.shape[1] != h.node_in or obs.edge_features.shape[1] != h.edge_in \
            or obs.global_features.shape[0] != h.global_in:
        raise ValueError(
            f"observation dims (node {obs.node_features.shape[1]}, edge {obs.edge_features.shape[1]}, "
            f"global {obs.global_features.shape[0]}) do not match weights "
            f"({h.node_in}, {h.edge_in}, {h.global_in})")
    N, E = obs.num_nodes, obs.num_edges
    s, r = obs.senders, obs.receivers
    v = _mlp(obs.node_features, t, "enc.node", h.enc_depth)
    e = _mlp(obs.edge_features, t, "enc.edge", h.enc_depth)
    u = _mlp(obs.global_features[None, :], t, "enc.global", h.enc_depth)
    ops = (N + E + 1) * h.enc_depth
    if obs.directed:
        edge_to_node, edge_rows = r, slice(None)
    else:
        edge_to_node = np.concatenate([s, r])
        edge_rows = np.concatenate([np.arange(E), np.arange(E)])
    for layer in range(h.core_layers):
        key = f"core.{0 if h.shared_core else layer}"
        e = _mlp(np.concatenate([np.repeat(u, E, 0), e, v[s], v[r]], axis=1), t, f"{key}.edge", h.mlp_depth)
        agg_e = _segment_mean(e[edge_rows], edge_to_node, N)
        v = _mlp(np.concatenate([np.repeat(u, N, 0), v, agg_e], axis=1), t, f"{key}.node", h.mlp_depth)
        mean_e = e.mean(axis=0, keepdims=True) if E else np.zeros_like(u)
        mean_v = v.mean(axis=0, keepdims=True) if N else np.zeros_like(u)
        u = _mlp(np.concatenate([u, mean_e, mean_v], axis=1), t, f"{key}.global", h.mlp_depth)
        ops += (N + E + 1) * h.mlp_depth
    node_q = _mlp(v, t, "dec.node", h.dec_depth, final_relu=False)
    edge_q = _mlp(e, t, "dec.edge", h.dec_depth, final_relu=False)
    ops += (N + E) * h.dec_depth
    q = {}
    for action, (kind, idx, col) in obs.action_index.items():
        q[action] = float(node_q[idx, col] if kind == "node" else edge_q[idx, 0])
    q_release = None
    if h.release_head:
        q_release = float(_mlp(u, t, "release", 2, final_relu=False)[0, 0])
        ops += 2
    return QOutput(q, q_release, ops)


class GnnPolicy:
    """Callable wrapper: observation -> QOutput."""

    def __init__(self, weights: PolicyWeights):
        self.weights = weights

    def __call__(self, obs: GraphObservation) -> QOutput:
        return forward(obs, self.weights)
