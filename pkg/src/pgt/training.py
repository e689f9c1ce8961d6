"""Training loop, reranking, and the end-to-end pipeline glue.

The optimizer is adaptive-moment gradient descent (betas 0.9/0.999,
eps 1e-8, no weight decay) with a linear learning-rate decay to zero over the
total number of optimizer steps and no warmup. Training minimizes binary
cross-entropy over balanced relevant/non-relevant examples; gradients are
accumulated over ``batch_size`` examples per step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graphs import build_bertprf_input, build_graph
from .model import forward_bert, forward_pgt
from .textdata import tokenize


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 2
    batch_size: int = 8
    lr: float = 5e-6
    seed: int = 0
    rel_threshold: int = 2
    k: int = 7
    variant: str = "base"

    def __post_init__(self):
        if self.epochs < 1 or self.lr < 0 or self.k < 1:
            raise ValueError("epochs >= 1, lr >= 0 and k >= 1 are required")


class Adam:
    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params  # list of (name, Tensor)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {name: np.zeros_like(t.data) for name, t in params}
        self.v = {name: np.zeros_like(t.data) for name, t in params}
        self.t = 0

    def step(self, lr):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, tensor in self.params:
            g = tensor.grad
            if g is None:
                continue
            m = self.m[name] = b1 * self.m[name] + (1 - b1) * g
            v = self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            tensor.data = tensor.data - lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grads(self):
        for _, tensor in self.params:
            tensor.zero_grad()


def train(inputs, weights, model_config, train_config, forward=None):
    """Optimize ``weights`` in place over (input, label) pairs.

    ``inputs`` is a list of (graph_or_sequence, label). ``forward`` defaults
    to the graph forward; pass ``forward_bert`` for the single-sequence
    baselines. Returns the loss curve as a list of (step, lr, mean_loss).
    """
    if not inputs:
        raise ValueError("no training examples")
    forward = forward or forward_pgt
    rng = np.random.default_rng(train_config.seed)
    optimizer = Adam(weights.parameters())

    per_epoch = max(1, -(-len(inputs) // train_config.batch_size))
    total_steps = train_config.epochs * per_epoch
    curve = []
    step = 0
    for _ in range(train_config.epochs):
        order = rng.permutation(len(inputs))
        for start in range(0, len(order), train_config.batch_size):
            batch = order[start:start + train_config.batch_size]
            optimizer.zero_grads()
            losses = []
            for idx in batch:
                item, label = inputs[idx]
                with ad.Tape():
                    logits = forward(item, weights, model_config, train=True, rng=rng)
                    if not np.isfinite(logits.data).all():
                        raise TrainingDiverged(f"non-finite logits at step {step}")
                    loss = ad.scale(ad.cross_entropy(logits, label), 1.0 / len(batch))
                ad.backward(loss)
                losses.append(float(loss.data) * len(batch))
            mean_loss = sum(losses) / len(losses)
            if not np.isfinite(mean_loss):
                raise TrainingDiverged(f"non-finite loss at step {step}")
            lr = train_config.lr * (1.0 - step / total_steps)
            optimizer.step(lr)
            curve.append((step, lr, mean_loss))
            step += 1
    return curve


def write_loss_curve(curve, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "lr", "loss"])
        for step, lr, loss in curve:
            writer.writerow([step, f"{lr:.8g}", f"{loss:.8g}"])


# ---------------------------------------------------------------------------
# Reranking
# ---------------------------------------------------------------------------


def rerank(run, depth, score_fn):
    """Rescore the top ``depth`` entries per query, keep the tail as-is.

    ``score_fn(query_id, doc_id)`` returns the new score. Rescored entries are
    sorted by score descending with ties broken by doc_id ascending; entries
    below the depth keep their original relative order.
    """
    if depth < 1:
        raise ValueError("rerank depth must be >= 1")
    out = {}
    for qid, entries in run.items():
        head = entries[:depth]
        tail = entries[depth:]
        rescored = [(doc_id, score_fn(qid, doc_id)) for doc_id, _ in head]
        rescored.sort(key=lambda e: (-e[1], e[0]))
        out[qid] = rescored + list(tail)
    return out


def feedback_docs(run, query_id, k, exclude=None):
    """Top-k feedback doc ids from the first-stage run for one query.

    ``exclude`` (normally the candidate being scored) is skipped; if the run
    is shallower than k the available documents are used.
    """
    docs = []
    for doc_id, _ in run.get(query_id, ()):
        if doc_id == exclude:
            continue
        docs.append(doc_id)
        if len(docs) == k:
            break
    return docs


class GraphScorer:
    """Builds a graph per (query, candidate) and scores it with the model.

    The score is the relevance logit difference logit[1] - logit[0].
    """

    def __init__(self, weights, model_config, vocab, corpus, queries, run, k,
                 exclude_candidate=True):
        self.weights = weights
        self.config = model_config
        self.vocab = vocab
        self.corpus = corpus
        self.queries = queries
        self.run = run
        self.k = k
        self.exclude_candidate = exclude_candidate

    def build(self, query_id, doc_id):
        q_ids = tokenize(self.queries[query_id], self.vocab)
        dc_ids = tokenize(self.corpus[doc_id], self.vocab)
        exclude = doc_id if self.exclude_candidate else None
        fb = [
            tokenize(self.corpus[d], self.vocab)
            for d in feedback_docs(self.run, query_id, self.k, exclude=exclude)
        ]
        return build_graph(
            q_ids, dc_ids, fb, self.config.variant, self.config.max_node_len,
            query_id=query_id, doc_id=doc_id,
        )

    def __call__(self, query_id, doc_id):
        logits = forward_pgt(self.build(query_id, doc_id), self.weights, self.config)
        return float(logits.data[1] - logits.data[0])


class SequenceScorer:
    """Single-sequence baseline scorer (plain reranker for k=0, PRF input otherwise)."""

    def __init__(self, weights, model_config, vocab, corpus, queries, run, k,
                 exclude_candidate=True, max_feedback=5):
        self.weights = weights
        self.config = model_config
        self.vocab = vocab
        self.corpus = corpus
        self.queries = queries
        self.run = run
        self.k = k
        self.exclude_candidate = exclude_candidate
        self.max_feedback = max_feedback

    def build(self, query_id, doc_id):
        q_ids = tokenize(self.queries[query_id], self.vocab)
        dc_ids = tokenize(self.corpus[doc_id], self.vocab)
        exclude = doc_id if self.exclude_candidate else None
        fb = [
            tokenize(self.corpus[d], self.vocab)
            for d in feedback_docs(self.run, query_id, self.k, exclude=exclude)
        ] if self.k else []
        return build_bertprf_input(
            q_ids, dc_ids, fb, self.config.max_seq_len, max_feedback=self.max_feedback
        )

    def __call__(self, query_id, doc_id):
        logits = forward_bert(self.build(query_id, doc_id), self.weights, self.config)
        return float(logits.data[1] - logits.data[0])


def prepare_inputs(examples, scorer):
    """Materialize (model input, label) pairs for training via a scorer's builder."""
    return [(scorer.build(ex.query_id, ex.doc_id), ex.label) for ex in examples]
