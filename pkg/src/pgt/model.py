"""The graph reranker encoder and its single-sequence baseline.

Per node, a standard Transformer encoder layer stack runs token-level
self-attention. In a configurable set of final layers (default: the last
three), the [CLS] states of all nodes additionally attend to each other:

    h_hat(s) = sum over neighbors s' of softmax(q(s)^T k(s') / sqrt(d_k)) v(s')

The inter-node result is concatenated with the intra-attention [CLS] output
and mapped back to the hidden size by a learned combine projection; non-CLS
positions bypass the inter step. Scoring takes a softmax-weighted sum of the
per-node relevance projections of the final [CLS] states.

``forward_bert`` runs the same stack on one sequence with no inter-node step
and scores the [CLS] state directly; with tied weights and the inter layers
disabled, a single-node graph forward is numerically identical to it.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graphs import NodeInput, PgtGraph

CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    num_layers: int = 2
    hidden_size: int = 32
    num_heads: int = 2
    ffn_size: int = 64
    vocab_size: int = 64
    max_node_len: int = 128
    max_seq_len: int = 512
    inter_attention_layers: tuple = None
    variant: str = "base"
    dropout: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.hidden_size % self.num_heads != 0:
            raise ValueError(
                f"hidden_size {self.hidden_size} not divisible by {self.num_heads} heads"
            )
        if self.max_node_len < 8:
            raise ValueError("max_node_len must be >= 8")
        if self.inter_attention_layers is None:
            first = max(0, self.num_layers - 3)
            self.inter_attention_layers = tuple(range(first, self.num_layers))
        else:
            self.inter_attention_layers = tuple(sorted(self.inter_attention_layers))
        for layer in self.inter_attention_layers:
            if not 0 <= layer < self.num_layers:
                raise ValueError(f"inter attention layer {layer} out of range")

    @property
    def head_dim(self):
        return self.hidden_size // self.num_heads


class PgtWeights:
    """Named parameter tensors for the full model (encoder + hub + scorer)."""

    def __init__(self, tensors):
        self.tensors = dict(tensors)

    def __getitem__(self, name):
        return self.tensors[name]

    def parameters(self):
        return list(self.tensors.items())

    def zero_grads(self):
        for t in self.tensors.values():
            t.zero_grad()

    def astype(self, dtype):
        return PgtWeights(
            {
                name: Tensor(t.data.astype(dtype), requires_grad=t.requires_grad)
                for name, t in self.tensors.items()
            }
        )

    def copy(self):
        return self.astype(next(iter(self.tensors.values())).dtype)


def _truncated_normal(rng, shape, std, dtype):
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out.astype(dtype)


def _fan_uniform(rng, fan_in, fan_out, shape, dtype):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_weights(config, dtype=np.float32):
    """Deterministic initialization from ``config.seed``.

    Inter-node (hub and combine) matrices use fan-based uniform bounds; all
    other matrices and embeddings use a truncated normal with std 0.02. Biases
    start at zero, layer-norm gains at one.
    """
    rng = np.random.default_rng(config.seed)
    d = config.hidden_size
    f = config.ffn_size
    w = {}

    def param(name, arr):
        w[name] = Tensor(arr, requires_grad=True)

    def normal(name, shape):
        param(name, _truncated_normal(rng, shape, 0.02, dtype))

    def zeros(name, shape):
        param(name, np.zeros(shape, dtype=dtype))

    def ones(name, shape):
        param(name, np.ones(shape, dtype=dtype))

    n_pos = max(config.max_node_len, config.max_seq_len)
    normal("tok_emb", (config.vocab_size, d))
    normal("pos_emb", (n_pos, d))
    normal("seg_emb", (2, d))
    ones("emb_ln_g", (d,))
    zeros("emb_ln_b", (d,))

    for i in range(config.num_layers):
        for proj in ("q", "k", "v", "o"):
            normal(f"layer{i}.W{proj}", (d, d))
            zeros(f"layer{i}.b{proj}", (d,))
        ones(f"layer{i}.ln1_g", (d,))
        zeros(f"layer{i}.ln1_b", (d,))
        normal(f"layer{i}.W1", (d, f))
        zeros(f"layer{i}.b1", (f,))
        normal(f"layer{i}.W2", (f, d))
        zeros(f"layer{i}.b2", (d,))
        ones(f"layer{i}.ln2_g", (d,))
        zeros(f"layer{i}.ln2_b", (d,))

    for i in config.inter_attention_layers:
        for proj in ("q", "k", "v"):
            param(f"inter{i}.W{proj}", _fan_uniform(rng, d, d, (d, d), dtype))
            zeros(f"inter{i}.b{proj}", (d,))
        param(f"inter{i}.Wc", _fan_uniform(rng, 2 * d, d, (2 * d, d), dtype))
        zeros(f"inter{i}.bc", (d,))

    normal("score.W", (d, 2))
    zeros("score.b", (2,))
    normal("score.u", (d, 1))

    return PgtWeights(w)


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------


def _linear(x, W, b):
    return ad.matmul(x, W) + b


def _embed(node, weights, config):
    n = len(node.token_ids)
    x = ad.take(weights["tok_emb"], node.token_ids)
    x = x + ad.take(weights["seg_emb"], node.segment_ids)
    x = x + ad.take(weights["pos_emb"], np.arange(n))
    return ad.layer_norm(x, weights["emb_ln_g"], weights["emb_ln_b"])


def intra_attention(weights, layer, x, mask, config):
    """Multi-head masked self-attention plus output projection (pre-residual)."""
    n = x.shape[0]
    mask = np.asarray(mask, dtype=x.dtype)
    if mask.sum() == 0:
        raise ValueError("intra_attention on an all-padding sequence")
    q = _linear(x, weights[f"layer{layer}.Wq"], weights[f"layer{layer}.bq"])
    k = _linear(x, weights[f"layer{layer}.Wk"], weights[f"layer{layer}.bk"])
    v = _linear(x, weights[f"layer{layer}.Wv"], weights[f"layer{layer}.bv"])

    dk = config.head_dim
    bias = Tensor(((mask - 1.0) * 1e9).reshape(1, n))
    heads = []
    for h in range(config.num_heads):
        qh = ad.narrow(q, 1, h * dk, dk)
        kh = ad.narrow(k, 1, h * dk, dk)
        vh = ad.narrow(v, 1, h * dk, dk)
        scores = ad.scale(ad.matmul(qh, ad.transpose(kh)), 1.0 / math.sqrt(dk))
        probs = ad.softmax(scores + bias, axis=1)
        heads.append(ad.matmul(probs, vh))
    ctx = heads[0] if len(heads) == 1 else ad.concat(heads, axis=1)
    return _linear(ctx, weights[f"layer{layer}.Wo"], weights[f"layer{layer}.bo"])


def inter_cls_attention(weights, layer, cls_states, adjacency, config):
    """Single-head attention among node [CLS] states, restricted to neighbors."""
    s = cls_states.shape[0]
    adj = np.zeros((s, s), dtype=cls_states.dtype)
    for i, neighbors in enumerate(adjacency):
        if not neighbors:
            raise ValueError(f"node {i} has no neighbors")
        for j in neighbors:
            adj[i, j] = 1.0
    q = _linear(cls_states, weights[f"inter{layer}.Wq"], weights[f"inter{layer}.bq"])
    k = _linear(cls_states, weights[f"inter{layer}.Wk"], weights[f"inter{layer}.bk"])
    v = _linear(cls_states, weights[f"inter{layer}.Wv"], weights[f"inter{layer}.bv"])
    scores = ad.scale(ad.matmul(q, ad.transpose(k)), 1.0 / math.sqrt(config.head_dim))
    probs = ad.softmax(scores + Tensor((adj - 1.0) * 1e9), axis=1)
    return ad.matmul(probs, v)


def _sublayer(x, out, g, b, config, train, rng):
    if train and config.dropout > 0:
        out = ad.dropout(out, config.dropout, rng)
    return ad.layer_norm(x + out, g, b)


def _ffn(weights, layer, x):
    h = ad.gelu(_linear(x, weights[f"layer{layer}.W1"], weights[f"layer{layer}.b1"]))
    return _linear(h, weights[f"layer{layer}.W2"], weights[f"layer{layer}.b2"])


def encode_graph(graph, weights, config, train=False, rng=None):
    """Run the layer stack over all nodes; returns per-node state tensors."""
    states = [_embed(node, weights, config) for node in graph.nodes]
    masks = [node.mask for node in graph.nodes]
    for layer in range(config.num_layers):
        intra = [
            intra_attention(weights, layer, x, m, config)
            for x, m in zip(states, masks)
        ]
        if layer in config.inter_attention_layers and len(graph.nodes) > 0:
            cls = ad.concat([ad.narrow(o, 0, 0, 1) for o in intra], axis=0)
            h_hat = inter_cls_attention(weights, layer, cls, graph.adjacency, config)
            combined = _linear(
                ad.concat([cls, h_hat], axis=1),
                weights[f"inter{layer}.Wc"],
                weights[f"inter{layer}.bc"],
            )
            intra = [
                ad.concat([ad.narrow(combined, 0, i, 1), ad.narrow(o, 0, 1, o.shape[0] - 1)], axis=0)
                for i, o in enumerate(intra)
            ]
        states = [
            _sublayer(x, o, weights[f"layer{layer}.ln1_g"], weights[f"layer{layer}.ln1_b"],
                      config, train, rng)
            for x, o in zip(states, intra)
        ]
        states = [
            _sublayer(x, _ffn(weights, layer, x),
                      weights[f"layer{layer}.ln2_g"], weights[f"layer{layer}.ln2_b"],
                      config, train, rng)
            for x in states
        ]
    return states


def forward_pgt(graph, weights, config, train=False, rng=None):
    """Relevance logits for one graph: weighted sum of node [CLS] scores."""
    states = encode_graph(graph, weights, config, train=train, rng=rng)
    cls = ad.concat([ad.narrow(x, 0, 0, 1) for x in states], axis=0)
    rel = _linear(cls, weights["score.W"], weights["score.b"])
    node_logits = ad.reshape(ad.matmul(cls, weights["score.u"]), (1, len(states)))
    alpha = ad.softmax(node_logits, axis=1)
    return ad.reshape(ad.matmul(alpha, rel), (2,))


def _encode_sequence(seq, weights, config, train=False, rng=None):
    x = _embed(seq, weights, config)
    for layer in range(config.num_layers):
        out = intra_attention(weights, layer, x, seq.mask, config)
        x = _sublayer(x, out, weights[f"layer{layer}.ln1_g"], weights[f"layer{layer}.ln1_b"],
                      config, train, rng)
        x = _sublayer(x, _ffn(weights, layer, x),
                      weights[f"layer{layer}.ln2_g"], weights[f"layer{layer}.ln2_b"],
                      config, train, rng)
    return x


def forward_bert(seq, weights, config, train=False, rng=None):
    """Single-sequence baseline: encoder stack, score the [CLS] state."""
    limit = max(config.max_seq_len, config.max_node_len)
    if len(seq.token_ids) > limit:
        raise ValueError(
            f"sequence length {len(seq.token_ids)} exceeds budget {limit}"
        )
    x = _encode_sequence(seq, weights, config, train=train, rng=rng)
    cls = ad.narrow(x, 0, 0, 1)
    return ad.reshape(_linear(cls, weights["score.W"], weights["score.b"]), (2,))


# ---------------------------------------------------------------------------
# Checkpoint IO
# ---------------------------------------------------------------------------


def save_checkpoint(path, weights, config, vocab_tokens=None, extra=None):
    header = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "vocab": vocab_tokens,
        "extra": extra or {},
    }
    arrays = {name: t.data for name, t in weights.parameters()}
    with open(path, "wb") as fh:
        np.savez(fh, __header__=np.frombuffer(
            json.dumps(header).encode("utf-8"), dtype=np.uint8), **arrays)


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as blob:
        header = json.loads(bytes(blob["__header__"]).decode("utf-8"))
        if header["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['version']}")
        cfg_dict = header["config"]
        cfg_dict["inter_attention_layers"] = tuple(cfg_dict["inter_attention_layers"])
        config = ModelConfig(**cfg_dict)
        weights = PgtWeights(
            {
                name: Tensor(blob[name], requires_grad=True)
                for name in blob.files
                if name != "__header__"
            }
        )
    return weights, config, header.get("vocab"), header.get("extra", {})
