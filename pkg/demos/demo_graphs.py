"""Graph assembly walkthrough: the five input variants and truncation.

Shows how one (query, candidate, feedback) instance is laid out as graph
nodes under each variant, and how over-long nodes are truncated (feedback
text first, then candidate text, never the query).
"""

from pgt import graphs, textdata

corpus = textdata.Corpus(
    {
        "dc": "neural rerankers score candidate passages for a query",
        "d1": "feedback documents supply additional relevance context",
        "d2": "sparse attention keeps long inputs affordable",
    }
)
vocab = textdata.build_vocab(corpus)
q_ids = textdata.tokenize("relevance feedback", vocab)
dc_ids = textdata.tokenize(corpus["dc"], vocab)
fb = [textdata.tokenize(corpus[d], vocab) for d in ("d1", "d2")]

for variant in graphs.VARIANTS:
    g = graphs.build_graph(q_ids, dc_ids, fb, variant, max_node_len=32)
    print(graphs.format_graph(g, vocab))
    print()

print("tight budget (max_node_len=12) truncates feedback text first:")
g = graphs.build_graph(q_ids, dc_ids, fb, "base", max_node_len=12)
print(graphs.format_graph(g, vocab))

print("\nsingle-sequence baseline input (shared budget, longest doc loses):")
seq = graphs.build_bertprf_input(q_ids, dc_ids, fb, max_len=24)
toks = [vocab.id_to_token[t] for t, m in zip(seq.token_ids, seq.mask) if m]
print(" ".join(toks))
