"""Tokenization, vocabulary, corpus/qrels/run file IO and training pairs.

File conventions follow the standard ad-hoc-retrieval formats:

* corpus TSV: ``doc_id<TAB>text`` per line
* queries TSV: ``query_id<TAB>text``
* qrels: ``query_id 0 doc_id grade`` (space separated)
* run: ``query_id Q0 doc_id rank score tag``
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
PAD_ID, UNK_ID, CLS_ID, SEP_ID = 0, 1, 2, 3
RESERVED = (PAD, UNK, CLS, SEP)

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class ParseError(ValueError):
    pass


def tokenize_text(text):
    """Lowercase and split on whitespace/punctuation."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Vocabulary:
    token_to_id: dict
    id_to_token: list
    min_freq: int = 1

    @property
    def size(self):
        return len(self.id_to_token)

    def encode(self, tokens):
        t2i = self.token_to_id
        return [t2i.get(t, UNK_ID) for t in tokens]


def build_vocab(corpus, min_freq=1):
    """Frequency-filtered vocabulary; ordering is frequency desc, then lexicographic."""
    if corpus.num_docs == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    freq = Counter()
    for text in corpus.docs.values():
        freq.update(tokenize_text(text))
    kept = sorted(
        (t for t, c in freq.items() if c >= min_freq),
        key=lambda t: (-freq[t], t),
    )
    id_to_token = list(RESERVED) + kept
    token_to_id = {t: i for i, t in enumerate(id_to_token)}
    return Vocabulary(token_to_id, id_to_token, min_freq)


def tokenize(text, vocab):
    """Token-id sequence; unknown tokens map to [UNK], no specials inserted."""
    return vocab.encode(tokenize_text(text))


class Corpus:
    def __init__(self, docs=None):
        self.docs = dict(docs or {})

    @property
    def num_docs(self):
        return len(self.docs)

    @property
    def avg_doc_len(self):
        if not self.docs:
            return 0.0
        return sum(len(tokenize_text(t)) for t in self.docs.values()) / len(self.docs)

    def __getitem__(self, doc_id):
        return self.docs[doc_id]

    def __contains__(self, doc_id):
        return doc_id in self.docs


@dataclass
class Qrels:
    """(query_id, doc_id) -> integer grade, stored per query."""

    grades: dict = field(default_factory=dict)

    def grade(self, query_id, doc_id):
        return self.grades.get(query_id, {}).get(doc_id, 0)

    def query_ids(self):
        return list(self.grades)

    def set(self, query_id, doc_id, grade):
        self.grades.setdefault(query_id, {})[doc_id] = int(grade)


# RunList: query_id -> [(doc_id, score), ...] in rank order.


@dataclass(frozen=True)
class TrainingExample:
    query_id: str
    doc_id: str
    label: int


# ---------------------------------------------------------------------------
# File IO
# ---------------------------------------------------------------------------


def load_tsv_corpus(path):
    docs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected 'doc_id<TAB>text'")
            doc_id, text = parts
            if doc_id in docs:
                raise ParseError(f"{path}:{lineno}: duplicate doc_id {doc_id!r}")
            docs[doc_id] = text
    return Corpus(docs)


def load_tsv_queries(path):
    queries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected 'query_id<TAB>text'")
            qid, text = parts
            if qid in queries:
                raise ParseError(f"{path}:{lineno}: duplicate query_id {qid!r}")
            queries[qid] = text
    return queries


def load_trec_qrels(path):
    qrels = Qrels()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ParseError(f"{path}:{lineno}: expected 'query_id 0 doc_id grade'")
            qid, _, doc_id, grade = parts
            try:
                qrels.set(qid, doc_id, int(grade))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: grade {grade!r} is not an integer")
    return qrels


def load_trec_run(path):
    run = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise ParseError(
                    f"{path}:{lineno}: expected 'query_id Q0 doc_id rank score tag'"
                )
            qid, _, doc_id, _rank, score, _tag = parts
            try:
                run.setdefault(qid, []).append((doc_id, float(score)))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: score {score!r} is not a number")
    return run


def write_tsv_corpus(corpus, path):
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, text in corpus.docs.items():
            fh.write(f"{doc_id}\t{text}\n")


def write_tsv_queries(queries, path):
    with open(path, "w", encoding="utf-8") as fh:
        for qid, text in queries.items():
            fh.write(f"{qid}\t{text}\n")


def write_trec_qrels(qrels, path):
    with open(path, "w", encoding="utf-8") as fh:
        for qid in qrels.grades:
            for doc_id, grade in qrels.grades[qid].items():
                fh.write(f"{qid} 0 {doc_id} {grade}\n")


def write_trec_run(run, path, tag="pgt"):
    with open(path, "w", encoding="utf-8") as fh:
        for qid, entries in run.items():
            for rank, (doc_id, score) in enumerate(entries, start=1):
                fh.write(f"{qid} Q0 {doc_id} {rank} {score:.6f} {tag}\n")


# ---------------------------------------------------------------------------
# Training pairs
# ---------------------------------------------------------------------------


def sample_training_pairs(qrels, run, rel_threshold=2, seed=0):
    """Balanced 1:1 positive/negative examples per query.

    Positives are judged documents with grade >= rel_threshold. Negatives are
    drawn (seeded) from the first-stage run entries that are unjudged or below
    the threshold, so training matches the reranking distribution. Queries
    without positives (or without a run) are dropped.
    """
    rng = np.random.default_rng(seed)
    examples = []
    for qid in sorted(qrels.grades):
        if qid not in run:
            continue
        judged = qrels.grades[qid]
        positives = sorted(d for d, g in judged.items() if g >= rel_threshold)
        if not positives:
            continue
        neg_pool = sorted(
            d for d, _ in run[qid] if judged.get(d, 0) < rel_threshold
        )
        n = min(len(positives), len(neg_pool))
        if n == 0:
            continue
        positives = positives[:n]
        negatives = list(rng.choice(neg_pool, size=n, replace=False))
        for d in positives:
            examples.append(TrainingExample(qid, d, 1))
        for d in negatives:
            examples.append(TrainingExample(qid, str(d), 0))
    return examples


# ---------------------------------------------------------------------------
# Synthetic desk-scale corpus
# ---------------------------------------------------------------------------

_TOPIC_SIZE = 8
_QUERY_TOKENS = 3
_RELEVANT_PER_QUERY = 12
_GRADES = (3, 3, 3, 2, 2, 2, 1, 1, 1, 1, 1, 1)
_SIGNAL_POOL = [f"sig{i:02d}" for i in range(16)]


def generate_synthetic_corpus(n_docs, n_queries, vocab_size=800, seed=0):
    """Synthetic (Corpus, queries, Qrels) with graded, learnable relevance.

    Each query owns a disjoint topic token set; its relevant documents share
    topic tokens (more for higher grades) plus grade-proportional counts of a
    shared signal vocabulary, so a trained scorer can generalize across
    queries. Distractor documents contain filler tokens only.
    """
    if n_docs < 1 or n_queries < 1 or vocab_size < 1:
        raise ValueError("n_docs, n_queries and vocab_size must be >= 1")
    rng = np.random.default_rng(seed)
    fillers = [f"w{i:04d}" for i in range(vocab_size)]

    docs = {}
    queries = {}
    qrels = Qrels()
    doc_counter = 0

    def next_doc_id():
        nonlocal doc_counter
        doc_id = f"D{doc_counter:06d}"
        doc_counter += 1
        return doc_id

    def filler_span(n):
        return [fillers[i] for i in rng.integers(0, len(fillers), size=n)]

    for qi in range(n_queries):
        topic = [f"t{qi:03d}x{j}" for j in range(_TOPIC_SIZE)]
        query_tokens = topic[:_QUERY_TOKENS]
        qid = f"Q{qi:03d}"
        queries[qid] = " ".join(query_tokens)

        n_rel = min(_RELEVANT_PER_QUERY, max(1, n_docs // max(1, n_queries) // 2))
        for grade in _GRADES[:n_rel]:
            if doc_counter >= n_docs:
                break
            qtok = query_tokens[rng.integers(0, _QUERY_TOKENS)]
            others = topic[_QUERY_TOKENS:]
            n_topic = 2 * grade - 1
            extra = list(rng.choice(others, size=min(n_topic, len(others)), replace=False))
            signal = [
                _SIGNAL_POOL[i]
                for i in rng.integers(0, len(_SIGNAL_POOL), size=3 * grade)
            ]
            body = [qtok] + extra + signal
            body += filler_span(max(0, int(rng.integers(20, 30)) - len(body)))
            perm = rng.permutation(len(body))
            doc_id = next_doc_id()
            docs[doc_id] = " ".join(body[i] for i in perm)
            qrels.set(qid, doc_id, grade)

    while doc_counter < n_docs:
        docs[next_doc_id()] = " ".join(filler_span(int(rng.integers(20, 30))))

    return Corpus(docs), queries, qrels
