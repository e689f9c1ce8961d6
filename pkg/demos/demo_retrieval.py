"""First-stage retrieval walkthrough: index, BM25, parameter sweep, RM3.

Generates a small synthetic collection, builds the inverted index, runs BM25,
tunes (k1, b) against the judgments, and shows what RM3 expansion adds.
"""

from pgt import metrics, retrieval, textdata

corpus, queries, qrels = textdata.generate_synthetic_corpus(
    n_docs=500, n_queries=10, vocab_size=400, seed=0
)
vocab = textdata.build_vocab(corpus)
index = retrieval.build_index(corpus, vocab)
print(f"indexed {index.num_docs} docs, vocab size {vocab.size}, avgdl {index.avgdl:.1f}")

run = {
    qid: retrieval.bm25_search(index, textdata.tokenize(text, vocab), 0.9, 0.4, 100)
    for qid, text in queries.items()
}
qid = sorted(queries)[0]
print(f"\ntop 5 for {qid} ({queries[qid]!r}):")
for doc_id, score in run[qid][:5]:
    grade = qrels.grades.get(qid, {}).get(doc_id, 0)
    print(f"  {doc_id}  score={score:.4f}  grade={grade}")

print("\nbaseline quality:")
print(metrics.format_table(metrics.evaluate(run, qrels)))

k1, b = retrieval.sweep_bm25(index, queries, qrels, [0.6, 0.9, 1.2], [0.0, 0.4, 0.8])
print(f"\nswept parameters: k1={k1} b={b}")

q_ids = textdata.tokenize(queries[qid], vocab)
first = retrieval.bm25_search(index, q_ids, k1, b, 10)
expanded = retrieval.rm3_expand(index, q_ids, first, fb_terms=8, fb_docs=10, mix=0.5)
print(f"\nRM3 expansion for {qid} (top weighted terms):")
for term_id, weight in sorted(expanded.weights.items(), key=lambda e: -e[1])[:8]:
    print(f"  {vocab.id_to_token[term_id]:10s} {weight:.4f}")
