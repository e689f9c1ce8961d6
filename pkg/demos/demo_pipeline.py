"""End-to-end pipeline: synthesize, retrieve, train the reranker, evaluate.

A scaled-down version of the full experiment: BM25 provides the first-stage
run and the feedback documents, the graph reranker is trained on balanced
positive/negative pairs from the training queries, and held-out queries
measure the improvement. Takes about half a minute on a laptop CPU.
"""

import time

from pgt import metrics, retrieval, textdata, training
from pgt.model import ModelConfig, init_weights

start = time.time()
corpus, queries, qrels = textdata.generate_synthetic_corpus(
    n_docs=1000, n_queries=30, vocab_size=600, seed=0
)
vocab = textdata.build_vocab(corpus)
index = retrieval.build_index(corpus, vocab)
run = {
    qid: retrieval.bm25_search(index, textdata.tokenize(t, vocab), 0.9, 0.4, 50)
    for qid, t in queries.items()
}

qids = sorted(queries)
train_q, test_q = qids[:20], qids[20:]
test_run = {q: run[q] for q in test_q}
test_qrels = textdata.Qrels({q: qrels.grades[q] for q in test_q})
bm25_ndcg = metrics.evaluate(test_run, test_qrels).mean("ndcg@10")
print(f"BM25 ndcg@10 on {len(test_q)} held-out queries: {bm25_ndcg:.4f}")

cfg = ModelConfig(num_layers=2, hidden_size=32, num_heads=2, ffn_size=64,
                  vocab_size=vocab.size, max_node_len=64, max_seq_len=256,
                  dropout=0.0, seed=0)
weights = init_weights(cfg)
train_qrels = textdata.Qrels({q: qrels.grades[q] for q in train_q})
examples = textdata.sample_training_pairs(train_qrels, run, seed=0)
scorer = training.GraphScorer(weights, cfg, vocab, corpus, queries, run, k=5)
inputs = training.prepare_inputs(examples, scorer)
print(f"training on {len(inputs)} balanced examples...")

curve = training.train(
    inputs, weights, cfg,
    training.TrainConfig(epochs=2, batch_size=8, lr=2e-3, seed=0, k=5),
)
print(f"loss {curve[0][2]:.4f} -> {curve[-1][2]:.4f} over {len(curve)} steps")

reranked = training.rerank(test_run, 50, scorer)
pgt_ndcg = metrics.evaluate(reranked, test_qrels).mean("ndcg@10")
print(f"reranked ndcg@10: {pgt_ndcg:.4f}  (+{pgt_ndcg - bm25_ndcg:.4f})")
print(f"total time: {time.time() - start:.0f}s")
