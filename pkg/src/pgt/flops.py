"""Closed-form multiply+add accounting for one forward pass.

Counts exactly the matrix-product work of the forward pass (embedding table
lookups, layer norms, softmaxes, biases and residuals are excluded), so the
analytic totals can be checked against instrumented counting of the real
matmuls. Every matrix product of shape [m,k] x [k,n] contributes 2*m*k*n
operations (m*n*k multiplications and the same number of additions).

Per sequence of length n and hidden size d (FFN size f, L layers):

* Q/K/V/output projections: 4 * 2nd^2 per layer
* attention score and context products: 2n^2 d each per layer
* FFN: 2ndf * 2 per layer

The graph model adds, per inter-attention layer with S nodes, hub Q/K/V
projections (6Sd^2), the [CLS] score/context products (4S^2 d) and the
combine projection (4Sd^2). The scoring head is 6Sd + 4S for the weighted-sum
scorer and 4d for the single-sequence baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

ARCHES = ("pgt", "bert_prf", "bert")


@dataclass
class FlopReport:
    arch: str
    components: dict = field(default_factory=dict)

    @property
    def total(self):
        return sum(self.components.values())

    def lines(self):
        out = [f"arch={self.arch}"]
        for name, value in self.components.items():
            out.append(f"{name}={value}")
        out.append(f"total={self.total}")
        return out


def count_flops(config, arch, seq_lens):
    """FlopReport for one forward pass.

    ``seq_lens`` holds per-node lengths for the graph model (one entry per
    node, typically ``k + 1`` entries of ``max_node_len``) and exactly one
    sequence length for the single-sequence baselines.
    """
    if arch not in ARCHES:
        raise ValueError(f"unknown arch {arch!r}; expected one of {ARCHES}")
    if arch != "pgt" and len(seq_lens) != 1:
        raise ValueError(f"arch {arch} takes a single sequence length")
    d = config.hidden_size
    f = config.ffn_size
    L = config.num_layers

    proj = attn = ffn = 0
    for n in seq_lens:
        proj += L * 8 * n * d * d
        attn += L * 4 * n * n * d
        ffn += L * 4 * n * d * f

    if arch == "pgt":
        s = len(seq_lens)
        inter = len(config.inter_attention_layers) * (10 * s * d * d + 4 * s * s * d)
        scoring = 6 * s * d + 4 * s
    else:
        inter = 0
        scoring = 4 * d

    return FlopReport(
        arch,
        {
            "intra_projections": proj,
            "attention_products": attn,
            "ffn": ffn,
            "inter_attention": inter,
            "scoring": scoring,
        },
    )


def compare_archs(config, k=5, node_len=None, baseline_len=None):
    """Per-example graph-vs-concatenated-baseline reports and their ratio."""
    node_len = node_len or config.max_node_len
    baseline_len = baseline_len or config.max_seq_len
    nodes = k + (0 if config.variant == "no_node_q_dc" else 1)
    pgt = count_flops(config, "pgt", [node_len] * nodes)
    prf = count_flops(config, "bert_prf", [baseline_len])
    return pgt, prf, pgt.total / prf.total
