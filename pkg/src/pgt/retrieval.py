"""First-stage retrieval: inverted index, BM25, parameter sweep and RM3.

BM25 uses the nonnegative idf floor ``ln(1 + (N - df + 0.5)/(df + 0.5))``.
RM3 follows the standard relevance-model recipe: term distributions of the
feedback documents weighted by softmax-normalized retrieval scores, capped to
the top feedback terms and interpolated with the original query distribution.
"""

from __future__ import annotations

import math
import pickle
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .textdata import PAD_ID, SEP_ID, Vocabulary, tokenize, tokenize_text

INDEX_MAGIC = "pgt-index"
INDEX_VERSION = 1


@dataclass
class InvertedIndex:
    postings: dict            # term_id -> [(doc_id, tf), ...] sorted by doc_id
    doc_lens: dict            # doc_id -> token count
    doc_tfs: dict             # doc_id -> {term_id: tf} (forward index, for RM3)
    vocab: Vocabulary
    avgdl: float = 0.0

    @property
    def num_docs(self):
        return len(self.doc_lens)

    def df(self, term_id):
        return len(self.postings.get(term_id, ()))

    def idf(self, term_id):
        n = self.num_docs
        df = self.df(term_id)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def save(self, path):
        with open(path, "wb") as fh:
            pickle.dump(
                {"magic": INDEX_MAGIC, "version": INDEX_VERSION, "index": self}, fh
            )

    @staticmethod
    def load(path):
        with open(path, "rb") as fh:
            blob = pickle.load(fh)
        if blob.get("magic") != INDEX_MAGIC:
            raise ValueError(f"{path} is not an index file")
        if blob.get("version") != INDEX_VERSION:
            raise ValueError(f"unsupported index version {blob.get('version')}")
        return blob["index"]


@dataclass
class WeightedQuery:
    weights: dict = field(default_factory=dict)  # term_id -> weight
    normalized: bool = False

    def items(self):
        return self.weights.items()


def build_index(corpus, vocab):
    """Full postings over token ids; reserved ids (PAD/UNK/...) are skipped."""
    if corpus.num_docs == 0:
        raise ValueError("cannot index an empty corpus")
    postings = {}
    doc_lens = {}
    doc_tfs = {}
    for doc_id in sorted(corpus.docs):
        tokens = tokenize_text(corpus.docs[doc_id])
        doc_lens[doc_id] = len(tokens)
        tf = Counter(t for t in vocab.encode(tokens) if t > SEP_ID)
        doc_tfs[doc_id] = dict(tf)
        for term_id, count in tf.items():
            postings.setdefault(term_id, []).append((doc_id, count))
    for plist in postings.values():
        plist.sort(key=lambda e: e[0])
    avgdl = sum(doc_lens.values()) / len(doc_lens)
    return InvertedIndex(postings, doc_lens, doc_tfs, vocab, avgdl)


def _bm25_term_score(index, term_id, tf, doc_len, k1, b):
    norm = k1 * (1.0 - b + b * doc_len / index.avgdl)
    return index.idf(term_id) * tf * (k1 + 1.0) / (tf + norm)


def bm25_search(index, query_ids, k1=0.9, b=0.4, top_k=1000):
    """Rank documents for a token-id query; returns [(doc_id, score), ...]."""
    weights = Counter(t for t in query_ids if t > SEP_ID)
    return bm25_search_weighted(
        index, WeightedQuery(dict(weights)), k1=k1, b=b, top_k=top_k
    )


def bm25_search_weighted(index, query, k1=0.9, b=0.4, top_k=1000):
    if k1 < 0 or not 0.0 <= b <= 1.0:
        raise ValueError(f"invalid BM25 parameters k1={k1} b={b}")
    scores = {}
    for term_id, weight in query.items():
        if weight <= 0:
            continue
        for doc_id, tf in index.postings.get(term_id, ()):
            s = _bm25_term_score(index, term_id, tf, index.doc_lens[doc_id], k1, b)
            scores[doc_id] = scores.get(doc_id, 0.0) + weight * s
    ranked = sorted(scores.items(), key=lambda e: (-e[1], e[0]))
    return ranked[:top_k]


def sweep_bm25(index, queries, qrels, k1_grid, b_grid, metric="map@100", top_k=1000):
    """Exhaustive grid search; ties break toward smaller k1 then smaller b."""
    from .metrics import evaluate

    if not k1_grid or not b_grid:
        raise ValueError("k1_grid and b_grid must be non-empty")
    best = None
    for k1 in sorted(k1_grid):
        for b in sorted(b_grid):
            run = {
                qid: bm25_search(index, tokenize(text, index.vocab), k1, b, top_k)
                for qid, text in queries.items()
            }
            result = evaluate(run, qrels)
            value = result.mean(metric)
            if best is None or value > best[0] + 1e-12:
                best = (value, k1, b)
    return best[1], best[2]


def rm3_expand(index, query_ids, feedback, fb_terms=10, fb_docs=10, mix=0.5):
    """RM3 expansion of a token-id query given scored feedback documents.

    ``feedback`` is a list of (doc_id, retrieval_score) in rank order, e.g. the
    head of a BM25 run. Returns a normalized WeightedQuery distribution.
    """
    if not 0.0 <= mix <= 1.0:
        raise ValueError(f"mix must be in [0, 1], got {mix}")
    counts = Counter(t for t in query_ids if t > SEP_ID)
    total = sum(counts.values())
    q_dist = {t: c / total for t, c in counts.items()} if total else {}

    feedback = list(feedback)[:fb_docs]
    if not feedback or mix == 1.0:
        return WeightedQuery(dict(q_dist), normalized=bool(q_dist))

    scores = np.array([s for _, s in feedback], dtype=np.float64)
    scores -= scores.max()
    doc_w = np.exp(scores)
    doc_w /= doc_w.sum()

    rm = {}
    for (doc_id, _), w in zip(feedback, doc_w):
        tfs = index.doc_tfs.get(doc_id, {})
        dlen = sum(tfs.values())
        if dlen == 0:
            continue
        for term_id, tf in tfs.items():
            rm[term_id] = rm.get(term_id, 0.0) + w * tf / dlen

    top = sorted(rm.items(), key=lambda e: (-e[1], e[0]))[:fb_terms]
    rm = dict(top)
    rm_total = sum(rm.values())
    if rm_total > 0:
        rm = {t: v / rm_total for t, v in rm.items()}

    final = {t: mix * v for t, v in q_dist.items()}
    for t, v in rm.items():
        final[t] = final.get(t, 0.0) + (1.0 - mix) * v
    z = sum(final.values())
    if z > 0:
        final = {t: v / z for t, v in final.items()}
    return WeightedQuery(final, normalized=bool(final))
