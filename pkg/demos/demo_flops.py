"""Cost-model walkthrough: analytic operation counts vs instrumentation.

The analytic model counts matrix-product multiply-adds only (embeddings,
layer norms, and softmaxes excluded). On tiny configs the closed forms are
checked against an instrumented forward pass; at the full-size config the
graph/baseline ratio is reported.
"""

from pgt import autodiff as ad
from pgt.flops import compare_archs, count_flops
from pgt.graphs import build_graph
from pgt.model import ModelConfig, forward_pgt, init_weights

cfg = ModelConfig(num_layers=2, hidden_size=8, num_heads=2, ffn_size=16,
                  vocab_size=40, max_node_len=16, max_seq_len=16, dropout=0.0)
w = init_weights(cfg)
g = build_graph([4, 5], [6, 7], [[8, 9, 10], [11, 12]], "base", 16)

with ad.FlopCounter() as fc:
    forward_pgt(g, w, cfg)
report = count_flops(cfg, "pgt", [len(n.token_ids) for n in g.nodes])
print(f"instrumented forward: {fc.flops} multiply-adds")
print(f"analytic model:       {report.total}")
assert fc.flops == report.total

print("\ncomponent breakdown:")
for line in report.lines():
    print(" ", line)

full = ModelConfig(num_layers=12, hidden_size=768, num_heads=12, ffn_size=3072,
                   vocab_size=30522, max_node_len=128, max_seq_len=512)
pgt, prf, ratio = compare_archs(full, k=5, node_len=128, baseline_len=512)
print(f"\nfull-size config, k=5 feedback docs:")
print(f"  graph model:    {pgt.total:,}")
print(f"  PRF baseline:   {prf.total:,}")
print(f"  ratio:          {ratio:.4f} per example")
print(f"  at half rerank depth the total-cost ratio halves: {ratio * 0.5:.4f}")
