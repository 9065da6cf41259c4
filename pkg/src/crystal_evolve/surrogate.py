"""Graph-convolutional property regressors, one model per scalar property.

Architecture, for a graph with one-hot node features x_i and Gaussian edge
features e_ij:

    v_i^0 = x_i . W_emb
    v_i   <- v_i + sum_{(i,j,e)} sigmoid(z . W_f + b_f) * softplus(z . W_s + b_s)
             with z = concat(v_i, v_j, e), summed over the edges leaving i
    u     = mean_i v_i
    y     = softplus(u . W_1 + b_1) . W_2 + b_2

The output lives in normalized target space; training min-max scales the
physical labels into [0, 1] and ``predict_physical`` inverts that map without
clamping.  All gradients are reverse-mode, written out analytically, and
checked against finite differences in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DegenerateLabelsError,
    EmptyBatchError,
    EmptyDatasetError,
    SchemaVersionMismatchError,
    ShapeMismatchError,
    UnfittedScalerError,
)
from .graph import GraphConfig, N_NODE_FEATURES, CrystalGraph

CHECKPOINT_SCHEMA_VERSION = 1
PROPERTY_NAMES = ("fe", "v", "de")


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 64
    n_conv: int = 3
    hidden_dim: int = 32
    seed: int = 0

    def __post_init__(self):
        for name in ("embed_dim", "n_conv", "hidden_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")

    def to_dict(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "n_conv": self.n_conv,
            "hidden_dim": self.hidden_dim,
            "seed": self.seed,
        }


@dataclass
class TrainReport:
    loss_history: list[float]
    final_train_mse: float
    epochs_run: int


@dataclass
class SurrogateModel:
    config: ModelConfig
    property_name: str
    params: dict[str, np.ndarray]
    edge_feature_size: int
    target_scaler: tuple[float, float] | None = None


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def init_model(config: ModelConfig, property_name: str,
               edge_feature_size: int | None = None) -> SurrogateModel:
    """Fresh model with weights uniform in +-1/sqrt(fan_in), drawn from a
    stream seeded by config.seed; the same seed gives bit-identical weights."""
    if property_name not in PROPERTY_NAMES:
        raise ConfigError(f"unknown property {property_name!r}")
    if edge_feature_size is None:
        edge_feature_size = GraphConfig().basis_size
    rng = np.random.Generator(np.random.PCG64(config.seed))
    d = config.embed_dim
    zw = 2 * d + edge_feature_size

    def draw(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    params: dict[str, np.ndarray] = {"embedding": draw((N_NODE_FEATURES, d), N_NODE_FEATURES)}
    for layer in range(config.n_conv):
        params[f"conv{layer}_wf"] = draw((zw, d), zw)
        params[f"conv{layer}_bf"] = draw((d,), zw)
        params[f"conv{layer}_ws"] = draw((zw, d), zw)
        params[f"conv{layer}_bs"] = draw((d,), zw)
    params["head_w1"] = draw((d, config.hidden_dim), d)
    params["head_b1"] = draw((config.hidden_dim,), d)
    params["head_w2"] = draw((config.hidden_dim, 1), config.hidden_dim)
    params["head_b2"] = draw((1,), config.hidden_dim)
    return SurrogateModel(config, property_name, params, edge_feature_size)


# --------------------------------------------------------------------------
# packed batches: the disjoint union of several graphs, so one full-batch
# training step is a handful of large array operations instead of a python
# loop over samples.

@dataclass
class _Packed:
    node_x: np.ndarray      # (N_total, F0)
    src: np.ndarray         # (E_total,)
    dst: np.ndarray
    edge_feat: np.ndarray   # (E_total, G)
    node_graph: np.ndarray  # (N_total,) graph index per node
    counts: np.ndarray      # (B,) nodes per graph
    n_graphs: int


def _pack(graphs: list[CrystalGraph]) -> _Packed:
    offsets = np.cumsum([0] + [g.n_nodes for g in graphs])
    node_x = np.concatenate([g.node_features for g in graphs])
    src = np.concatenate([g.edge_src + off for g, off in zip(graphs, offsets)])
    dst = np.concatenate([g.edge_dst + off for g, off in zip(graphs, offsets)])
    edge_feat = np.concatenate([g.edge_features for g in graphs])
    node_graph = np.concatenate(
        [np.full(g.n_nodes, b, dtype=np.int64) for b, g in enumerate(graphs)]
    )
    counts = np.array([g.n_nodes for g in graphs], dtype=float)
    return _Packed(node_x, src, dst, edge_feat, node_graph, counts, len(graphs))


def _check_shapes(model: SurrogateModel, graph: CrystalGraph) -> None:
    f0 = model.params["embedding"].shape[0]
    if graph.node_features.shape[1] != f0:
        raise ShapeMismatchError(
            f"graph {graph.source_id!r}: node feature width "
            f"{graph.node_features.shape[1]} != model input {f0}"
        )
    if graph.edge_features.shape[1] != model.edge_feature_size:
        raise ShapeMismatchError(
            f"graph {graph.source_id!r}: edge feature width "
            f"{graph.edge_features.shape[1]} != model basis {model.edge_feature_size}"
        )


def _forward_packed(model: SurrogateModel, packed: _Packed, keep_cache: bool):
    p = model.params
    d = model.config.embed_dim
    v = packed.node_x @ p["embedding"]
    cache = {"layers": []} if keep_cache else None
    for layer in range(model.config.n_conv):
        z = np.concatenate([v[packed.src], v[packed.dst], packed.edge_feat], axis=1)
        a_pre = z @ p[f"conv{layer}_wf"] + p[f"conv{layer}_bf"]
        b_pre = z @ p[f"conv{layer}_ws"] + p[f"conv{layer}_bs"]
        gate = _sigmoid(a_pre)
        core = _softplus(b_pre)
        messages = gate * core
        agg = np.zeros_like(v)
        np.add.at(agg, packed.src, messages)
        if keep_cache:
            cache["layers"].append((v, z, b_pre, gate, core))
        v = v + agg
    pooled = np.zeros((packed.n_graphs, d))
    np.add.at(pooled, packed.node_graph, v)
    pooled /= packed.counts[:, None]
    h_pre = pooled @ p["head_w1"] + p["head_b1"]
    hidden = _softplus(h_pre)
    y = (hidden @ p["head_w2"]).ravel() + p["head_b2"][0]
    if keep_cache:
        cache.update(pooled=pooled, h_pre=h_pre, hidden=hidden)
    return y, cache


def _backward_packed(model: SurrogateModel, packed: _Packed, cache: dict,
                     dy: np.ndarray) -> dict[str, np.ndarray]:
    p = model.params
    d = model.config.embed_dim
    grads: dict[str, np.ndarray] = {}

    grads["head_b2"] = np.array([dy.sum()])
    grads["head_w2"] = cache["hidden"].T @ dy[:, None]
    d_hidden = dy[:, None] @ p["head_w2"].T
    d_hpre = d_hidden * _sigmoid(cache["h_pre"])
    grads["head_w1"] = cache["pooled"].T @ d_hpre
    grads["head_b1"] = d_hpre.sum(axis=0)
    d_pooled = d_hpre @ p["head_w1"].T

    dv = d_pooled[packed.node_graph] / packed.counts[packed.node_graph][:, None]
    for layer in reversed(range(model.config.n_conv)):
        v_in, z, b_pre, gate, core = cache["layers"][layer]
        d_msg = dv[packed.src]
        d_gate = d_msg * core
        d_core = d_msg * gate
        d_apre = d_gate * gate * (1.0 - gate)
        d_bpre = d_core * _sigmoid(b_pre)
        grads[f"conv{layer}_wf"] = z.T @ d_apre
        grads[f"conv{layer}_bf"] = d_apre.sum(axis=0)
        grads[f"conv{layer}_ws"] = z.T @ d_bpre
        grads[f"conv{layer}_bs"] = d_bpre.sum(axis=0)
        dz = d_apre @ p[f"conv{layer}_wf"].T + d_bpre @ p[f"conv{layer}_ws"].T
        dv_next = dv.copy()  # residual path
        np.add.at(dv_next, packed.src, dz[:, :d])
        np.add.at(dv_next, packed.dst, dz[:, d:2 * d])
        dv = dv_next
    grads["embedding"] = packed.node_x.T @ dv
    return grads


# --------------------------------------------------------------------------
# public operations

def forward(model: SurrogateModel, graph: CrystalGraph) -> float:
    """Normalized-space prediction for one graph."""
    _check_shapes(model, graph)
    y, _ = _forward_packed(model, _pack([graph]), keep_cache=False)
    return float(y[0])


def loss_and_gradients(model: SurrogateModel,
                       batch: list[tuple[CrystalGraph, float]]):
    """Mean squared error over a batch of (graph, normalized label) pairs and
    its exact gradients with respect to every parameter."""
    if not batch:
        raise EmptyBatchError("batch is empty")
    for g, _ in batch:
        _check_shapes(model, g)
    packed = _pack([g for g, _ in batch])
    targets = np.array([t for _, t in batch], dtype=float)
    y, cache = _forward_packed(model, packed, keep_cache=True)
    residual = y - targets
    mse = float(np.mean(residual ** 2))
    dy = 2.0 * residual / len(batch)
    grads = _backward_packed(model, packed, cache, dy)
    return mse, grads


def train(model: SurrogateModel,
          dataset: list[tuple[CrystalGraph, float]],
          epochs: int,
          learning_rate: float) -> tuple[SurrogateModel, TrainReport]:
    """Full-batch gradient descent on min-max normalized labels.

    The target scaler is fit on this dataset's labels; loss_history records
    the pre-update MSE of each epoch and final_train_mse the MSE after the
    last update.  Deterministic for fixed inputs.
    """
    if not dataset:
        raise EmptyDatasetError("training dataset is empty")
    labels = np.array([t for _, t in dataset], dtype=float)
    lo, hi = float(labels.min()), float(labels.max())
    if hi <= lo:
        raise DegenerateLabelsError(
            f"labels for {model.property_name!r} span a zero range ({lo})"
        )
    model.target_scaler = (lo, hi)
    normalized = (labels - lo) / (hi - lo)

    for g, _ in dataset:
        _check_shapes(model, g)
    packed = _pack([g for g, _ in dataset])
    history: list[float] = []
    for _ in range(epochs):
        y, cache = _forward_packed(model, packed, keep_cache=True)
        residual = y - normalized
        history.append(float(np.mean(residual ** 2)))
        dy = 2.0 * residual / len(dataset)
        grads = _backward_packed(model, packed, cache, dy)
        for name, g_arr in grads.items():
            model.params[name] -= learning_rate * g_arr
    y_final, _ = _forward_packed(model, packed, keep_cache=False)
    final_mse = float(np.mean((y_final - normalized) ** 2))
    return model, TrainReport(history, final_mse, epochs)


def predict_physical(model: SurrogateModel, graph: CrystalGraph) -> float:
    """Inverse of the 0-1 label normalization; never clamped to the training
    range, so evolution can see improvement beyond the training hull."""
    if model.target_scaler is None:
        raise UnfittedScalerError(
            f"model for {model.property_name!r} has no fitted target scaler"
        )
    lo, hi = model.target_scaler
    return lo + forward(model, graph) * (hi - lo)


# --------------------------------------------------------------------------
# checkpoints

def save_model(model: SurrogateModel, path: str | Path) -> None:
    doc = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "property_name": model.property_name,
        "config": model.config.to_dict(),
        "edge_feature_size": model.edge_feature_size,
        "target_scaler": list(model.target_scaler) if model.target_scaler else None,
        "tensors": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in model.params.items()
        },
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> SurrogateModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaVersionMismatchError(f"{path}: not a model checkpoint ({exc})") from None
    if not isinstance(doc, dict) or doc.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise SchemaVersionMismatchError(
            f"{path}: schema_version {doc.get('schema_version')!r} != {CHECKPOINT_SCHEMA_VERSION}"
        )
    try:
        config = ModelConfig(**doc["config"])
        params = {
            name: np.array(entry["data"], dtype=float).reshape(entry["shape"])
            for name, entry in doc["tensors"].items()
        }
        scaler = doc["target_scaler"]
        model = SurrogateModel(
            config=config,
            property_name=doc["property_name"],
            params=params,
            edge_feature_size=int(doc["edge_feature_size"]),
            target_scaler=tuple(scaler) if scaler is not None else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaVersionMismatchError(f"{path}: malformed checkpoint ({exc})") from None
    return model
