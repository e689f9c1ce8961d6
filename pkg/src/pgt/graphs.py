"""Graph assembly for the graph reranker and its single-sequence baselines.

Each graph node is one token sequence. Feedback nodes carry the feedback
document with the query (and, depending on the variant, the candidate)
prepended; an optional special node carries the query-candidate pair. The
inter-node adjacency is fully connected, including self loops.

Sequence layout per segment is ``[CLS] span [SEP] span [SEP] ...``; every
retained span keeps its trailing [SEP]. Truncation drops feedback-document
tokens first, then candidate tokens, never query tokens.
"""

from __future__ import annotations

from dataclasses import dataclass

from .textdata import CLS_ID, PAD_ID, SEP_ID

VARIANTS = ("base", "no_pre_dc", "no_pre_q_dc", "no_node_dc", "no_node_q_dc")

QDC_NODE = "qdc_node"
FEEDBACK_NODE = "feedback_node"


class GraphBuildError(ValueError):
    pass


@dataclass
class NodeInput:
    token_ids: list
    segment_ids: list
    mask: list
    kind: str

    @property
    def length(self):
        return sum(self.mask)


@dataclass
class PgtGraph:
    nodes: list
    adjacency: list           # neighbor index set per node (reflexive)
    query_id: str = ""
    doc_id: str = ""
    variant: str = "base"
    k: int = 0


def _assemble_node(spans, max_node_len, kind, pad_to=None):
    """Build a padded NodeInput from (tokens, segment_id, truncation_rank) spans.

    Spans with higher truncation_rank lose tokens first; rank None means the
    span must never be truncated.
    """
    spans = [list(s) for s in spans]

    def total_len():
        return 1 + sum(len(tokens) + 1 for tokens, _, _ in spans if tokens)

    over = total_len() - max_node_len
    if over > 0:
        for rank in (2, 1):
            for span in spans:
                if span[2] == rank and over > 0 and span[0]:
                    drop = min(over, len(span[0]))
                    removed_sep = 1 if drop == len(span[0]) else 0
                    span[0] = span[0][: len(span[0]) - drop]
                    over -= drop + removed_sep
    if over > 0:
        raise GraphBuildError(
            f"query does not fit in max_node_len={max_node_len}"
        )

    ids = [CLS_ID]
    segs = [0]
    for tokens, seg, _ in spans:
        if not tokens:
            continue
        ids.extend(tokens)
        ids.append(SEP_ID)
        segs.extend([seg] * (len(tokens) + 1))
    mask = [1] * len(ids)
    width = pad_to if pad_to is not None else max_node_len
    pad = width - len(ids)
    return NodeInput(
        ids + [PAD_ID] * pad, segs + [0] * pad, mask + [0] * pad, kind
    )


def build_graph(q_ids, dc_ids, feedback, variant, max_node_len, query_id="", doc_id=""):
    """Assemble the input graph for one (query, candidate, feedback) instance."""
    if variant not in VARIANTS:
        raise GraphBuildError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if not q_ids:
        raise GraphBuildError("query is empty after tokenization")
    if not feedback:
        raise GraphBuildError("at least one feedback document is required")
    if max_node_len < 8:
        raise GraphBuildError(f"max_node_len must be >= 8, got {max_node_len}")

    nodes = []
    if variant != "no_node_q_dc":
        if variant == "no_node_dc":
            spans = [(q_ids, 0, None)]
        else:
            spans = [(q_ids, 0, None), (dc_ids, 1, 1)]
        nodes.append(_assemble_node(spans, max_node_len, QDC_NODE))

    for di_ids in feedback:
        if variant in ("base", "no_node_dc", "no_node_q_dc"):
            spans = [(q_ids, 0, None), (dc_ids, 0, 1), (di_ids, 1, 2)]
        elif variant == "no_pre_dc":
            spans = [(q_ids, 0, None), (di_ids, 1, 2)]
        else:  # no_pre_q_dc
            spans = [(di_ids, 1, 2)]
        nodes.append(_assemble_node(spans, max_node_len, FEEDBACK_NODE))

    all_nodes = set(range(len(nodes)))
    adjacency = [set(all_nodes) for _ in nodes]
    return PgtGraph(nodes, adjacency, query_id, doc_id, variant, len(feedback))


def build_bertprf_input(q_ids, dc_ids, feedback, max_len, max_feedback=5):
    """Single concatenated PRF sequence for the full-attention baselines.

    With no feedback documents this degenerates to the plain reranker input
    ``[CLS] q [SEP] d_c [SEP]``. Truncation repeatedly removes one token from
    the currently longest feedback document until the sequence fits.
    """
    if not q_ids:
        raise GraphBuildError("query is empty after tokenization")
    if max_feedback is not None and len(feedback) > max_feedback:
        raise GraphBuildError(
            f"{len(feedback)} feedback documents exceed the cap of {max_feedback}"
        )
    fb = [list(d) for d in feedback]

    def total_len():
        n = 1 + len(q_ids) + 1 + len(dc_ids) + 1
        n += sum(len(d) + 1 for d in fb if d)
        return n

    while total_len() > max_len:
        longest = max(fb, key=len, default=None)
        if longest is None or not longest:
            raise GraphBuildError(
                f"query+candidate do not fit in max_len={max_len} "
                "even with feedback fully truncated"
            )
        longest.pop()
        fb = [d for d in fb if d]

    ids = [CLS_ID] + list(q_ids) + [SEP_ID] + list(dc_ids) + [SEP_ID]
    segs = [0] * len(ids)
    for d in fb:
        ids.extend(d)
        ids.append(SEP_ID)
        segs.extend([1] * (len(d) + 1))
    mask = [1] * len(ids)
    pad = max_len - len(ids)
    return NodeInput(
        ids + [PAD_ID] * pad, segs + [0] * pad, mask + [0] * pad, QDC_NODE
    )


def format_graph(graph, vocab=None):
    """Human-readable node layout (debug CLI and golden layout tests)."""
    lines = [f"variant={graph.variant} nodes={len(graph.nodes)} k={graph.k}"]
    for i, node in enumerate(graph.nodes):
        toks = []
        for tid, seg, m in zip(node.token_ids, node.segment_ids, node.mask):
            if not m:
                break
            name = vocab.id_to_token[tid] if vocab else str(tid)
            toks.append(f"{name}/{seg}")
        lines.append(f"node {i} [{node.kind}] len={node.length}: " + " ".join(toks))
    return "\n".join(lines)
