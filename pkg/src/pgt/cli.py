"""Command line interface.

Subcommands: index, search, sweep, rm3, graph, train, rerank, eval, flops,
synth. Defaults can also come from a key=value config file via ``--config``;
explicit flags win. All randomness is seeded through ``--seed``.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import flops as flops_mod
from . import graphs, metrics, model, retrieval, textdata, training


def _load_config_file(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise textdata.ParseError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config_file(args):
    if not getattr(args, "config", None):
        return args
    file_values = _load_config_file(args.config)
    for key, raw in file_values.items():
        if not hasattr(args, key):
            continue
        current = getattr(args, key)
        caster = type(current) if current is not None else str
        if caster is bool:
            setattr(args, key, raw.lower() in ("1", "true", "yes"))
        else:
            setattr(args, key, caster(raw))
    return args


def _grid(text):
    return [float(v) for v in text.split(",") if v]


def _model_config(args, vocab_size):
    return model.ModelConfig(
        num_layers=args.layers,
        hidden_size=args.hidden,
        num_heads=args.heads,
        ffn_size=args.ffn,
        vocab_size=vocab_size,
        max_node_len=args.max_node_len,
        max_seq_len=args.max_seq_len,
        variant=args.variant,
        dropout=args.dropout,
        seed=args.seed,
    )


def _add_model_flags(p):
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--ffn", type=int, default=64)
    p.add_argument("--max-node-len", type=int, default=64)
    p.add_argument("--max-seq-len", type=int, default=256)
    p.add_argument("--variant", choices=graphs.VARIANTS, default="base")
    p.add_argument("--dropout", type=float, default=0.1)


def build_parser():
    parser = argparse.ArgumentParser(prog="pgt")
    parser.add_argument("--config", help="key=value config file supplying defaults")
    parser.add_argument("--seed", type=int, default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus/queries/qrels")
    p.add_argument("--n-docs", type=int, default=2000)
    p.add_argument("--n-queries", type=int, default=70)
    p.add_argument("--vocab-size", type=int, default=800)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("index", help="build a binary inverted index from a corpus TSV")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-freq", type=int, default=1)

    p = sub.add_parser("search", help="BM25 search, emits a TREC run file")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k1", type=float, default=0.9)
    p.add_argument("--b", type=float, default=0.4)
    p.add_argument("--topk", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.add_argument("--tag", default="bm25")

    p = sub.add_parser("sweep", help="BM25 parameter sweep, prints chosen k1/b")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--k1-grid", default="0.6,0.9,1.2,1.5")
    p.add_argument("--b-grid", default="0.0,0.2,0.4,0.6,0.8")
    p.add_argument("--metric", default="map@100")
    p.add_argument("--topk", type=int, default=100)

    p = sub.add_parser("rm3", help="RM3-expanded BM25 search, emits a TREC run file")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--fb-docs", type=int, default=10)
    p.add_argument("--fb-terms", type=int, default=10)
    p.add_argument("--mix", type=float, default=0.5)
    p.add_argument("--k1", type=float, default=0.9)
    p.add_argument("--b", type=float, default=0.4)
    p.add_argument("--topk", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.add_argument("--tag", default="rm3")

    p = sub.add_parser("graph", help="print a sample node layout for a variant")
    p.add_argument("--variant", choices=graphs.VARIANTS, default="base")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--max-node-len", type=int, default=24)

    p = sub.add_parser("train", help="train a reranker, writes a checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--run", required=True)
    p.add_argument("--arch", choices=("pgt", "bert_prf", "bert"), default="pgt")
    p.add_argument("--k", type=int, default=7)
    p.add_argument("--epochs", type=int, default=2)
    p.add_argument("--lr", type=float, default=5e-6)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--rel-threshold", type=int, default=2)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-csv")
    _add_model_flags(p)

    p = sub.add_parser("rerank", help="rerank a run file with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--run", required=True)
    p.add_argument("--depth", type=int, default=500)
    p.add_argument("--out", required=True)
    p.add_argument("--tag", default="reranked")

    p = sub.add_parser("eval", help="evaluate a run file against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--rel-threshold", type=int, default=2)
    p.add_argument("--csv", action="store_true")

    p = sub.add_parser("flops", help="per-example operation counts for an architecture")
    p.add_argument("--arch", choices=flops_mod.ARCHES, default="pgt")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--node-len", type=int, default=128)
    p.add_argument("--seq-len", type=int, default=512)
    p.add_argument("--layers", type=int, default=12)
    p.add_argument("--hidden", type=int, default=768)
    p.add_argument("--heads", type=int, default=12)
    p.add_argument("--ffn", type=int, default=3072)
    p.add_argument("--variant", choices=graphs.VARIANTS, default="base")

    return parser


def _cmd_synth(args):
    import os

    corpus, queries, qrels = textdata.generate_synthetic_corpus(
        args.n_docs, args.n_queries, args.vocab_size, args.seed
    )
    os.makedirs(args.out_dir, exist_ok=True)
    textdata.write_tsv_corpus(corpus, os.path.join(args.out_dir, "corpus.tsv"))
    textdata.write_tsv_queries(queries, os.path.join(args.out_dir, "queries.tsv"))
    textdata.write_trec_qrels(qrels, os.path.join(args.out_dir, "qrels.txt"))
    print(f"wrote {corpus.num_docs} docs, {len(queries)} queries to {args.out_dir}")
    return 0


def _cmd_index(args):
    corpus = textdata.load_tsv_corpus(args.corpus)
    vocab = textdata.build_vocab(corpus, min_freq=args.min_freq)
    index = retrieval.build_index(corpus, vocab)
    index.save(args.out)
    print(f"indexed {index.num_docs} docs, vocab size {vocab.size}, avgdl {index.avgdl:.2f}")
    return 0


def _cmd_search(args):
    index = retrieval.InvertedIndex.load(args.index)
    queries = textdata.load_tsv_queries(args.queries)
    run = {
        qid: retrieval.bm25_search(
            index, textdata.tokenize(text, index.vocab), args.k1, args.b, args.topk
        )
        for qid, text in queries.items()
    }
    textdata.write_trec_run(run, args.out, tag=args.tag)
    print(f"wrote run for {len(run)} queries to {args.out}")
    return 0


def _cmd_sweep(args):
    index = retrieval.InvertedIndex.load(args.index)
    queries = textdata.load_tsv_queries(args.queries)
    qrels = textdata.load_trec_qrels(args.qrels)
    k1, b = retrieval.sweep_bm25(
        index, queries, qrels, _grid(args.k1_grid), _grid(args.b_grid),
        metric=args.metric, top_k=args.topk,
    )
    print(f"k1={k1}")
    print(f"b={b}")
    return 0


def _cmd_rm3(args):
    index = retrieval.InvertedIndex.load(args.index)
    queries = textdata.load_tsv_queries(args.queries)
    run = {}
    for qid, text in queries.items():
        q_ids = textdata.tokenize(text, index.vocab)
        first = retrieval.bm25_search(index, q_ids, args.k1, args.b, args.fb_docs)
        expanded = retrieval.rm3_expand(
            index, q_ids, first, fb_terms=args.fb_terms, fb_docs=args.fb_docs,
            mix=args.mix,
        )
        run[qid] = retrieval.bm25_search_weighted(
            index, expanded, args.k1, args.b, args.topk
        )
    textdata.write_trec_run(run, args.out, tag=args.tag)
    print(f"wrote RM3 run for {len(run)} queries to {args.out}")
    return 0


def _cmd_graph(args):
    corpus = textdata.Corpus(
        {
            "dc": "neural rerankers score candidate passages",
            "d1": "feedback documents supply additional relevance context",
            "d2": "sparse attention keeps long inputs affordable",
            "d3": "graded judgments drive ranking evaluation",
        }
    )
    vocab = textdata.build_vocab(corpus)
    q_ids = textdata.tokenize("relevance feedback", vocab)
    dc_ids = textdata.tokenize(corpus["dc"], vocab)
    fb = [
        textdata.tokenize(corpus[d], vocab)
        for d in ["d1", "d2", "d3"][: args.k]
    ]
    graph = graphs.build_graph(q_ids, dc_ids, fb, args.variant, args.max_node_len)
    print(graphs.format_graph(graph, vocab))
    return 0


def _prepare_pipeline(args):
    corpus = textdata.load_tsv_corpus(args.corpus)
    queries = textdata.load_tsv_queries(args.queries)
    run = textdata.load_trec_run(args.run)
    return corpus, queries, run


def _cmd_train(args):
    corpus, queries, run = _prepare_pipeline(args)
    qrels = textdata.load_trec_qrels(args.qrels)
    vocab = textdata.build_vocab(corpus)
    cfg = _model_config(args, vocab.size)
    weights = model.init_weights(cfg)
    examples = textdata.sample_training_pairs(
        qrels, run, rel_threshold=args.rel_threshold, seed=args.seed
    )
    if args.arch == "pgt":
        scorer = training.GraphScorer(weights, cfg, vocab, corpus, queries, run, args.k)
        forward = model.forward_pgt
    else:
        k = 0 if args.arch == "bert" else args.k
        scorer = training.SequenceScorer(weights, cfg, vocab, corpus, queries, run, k)
        forward = model.forward_bert
    inputs = training.prepare_inputs(examples, scorer)
    tcfg = training.TrainConfig(
        epochs=args.epochs, batch_size=args.batch, lr=args.lr, seed=args.seed,
        rel_threshold=args.rel_threshold, k=args.k, variant=args.variant,
    )
    curve = training.train(inputs, weights, cfg, tcfg, forward=forward)
    model.save_checkpoint(
        args.out, weights, cfg, vocab_tokens=vocab.id_to_token,
        extra={"arch": args.arch, "k": args.k},
    )
    if args.loss_csv:
        training.write_loss_curve(curve, args.loss_csv)
    print(f"trained on {len(inputs)} examples for {len(curve)} steps; "
          f"final loss {curve[-1][2]:.4f}")
    return 0


def _cmd_rerank(args):
    corpus = textdata.load_tsv_corpus(args.corpus)
    queries = textdata.load_tsv_queries(args.queries)
    run = textdata.load_trec_run(args.run)
    weights, cfg, vocab_tokens, extra = model.load_checkpoint(args.checkpoint)
    vocab = textdata.Vocabulary(
        {t: i for i, t in enumerate(vocab_tokens)}, list(vocab_tokens)
    )
    arch = extra.get("arch", "pgt")
    k = int(extra.get("k", 7))
    if arch == "pgt":
        scorer = training.GraphScorer(weights, cfg, vocab, corpus, queries, run, k)
    else:
        scorer = training.SequenceScorer(
            weights, cfg, vocab, corpus, queries, run, 0 if arch == "bert" else k
        )
    reranked = training.rerank(run, args.depth, scorer)
    textdata.write_trec_run(reranked, args.out, tag=args.tag)
    print(f"reranked top {args.depth} of {len(run)} queries to {args.out}")
    return 0


def _cmd_eval(args):
    run = textdata.load_trec_run(args.run)
    qrels = textdata.load_trec_qrels(args.qrels)
    result = metrics.evaluate(run, qrels, rel_threshold=args.rel_threshold)
    print(metrics.format_table(result, csv=args.csv))
    return 0


def _cmd_flops(args):
    cfg = model.ModelConfig(
        num_layers=args.layers, hidden_size=args.hidden, num_heads=args.heads,
        ffn_size=args.ffn, vocab_size=1, max_node_len=max(8, args.node_len),
        max_seq_len=args.seq_len, variant=args.variant,
    )
    if args.arch == "pgt":
        nodes = args.k + (0 if args.variant == "no_node_q_dc" else 1)
        report = flops_mod.count_flops(cfg, "pgt", [args.node_len] * nodes)
    else:
        report = flops_mod.count_flops(cfg, args.arch, [args.seq_len])
    for line in report.lines():
        print(line)
    if args.arch == "pgt":
        baseline = flops_mod.count_flops(cfg, "bert_prf", [args.seq_len])
        print(f"ratio_vs_bert_prf={report.total / baseline.total:.6f}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "index": _cmd_index,
    "search": _cmd_search,
    "sweep": _cmd_sweep,
    "rm3": _cmd_rm3,
    "graph": _cmd_graph,
    "train": _cmd_train,
    "rerank": _cmd_rerank,
    "eval": _cmd_eval,
    "flops": _cmd_flops,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    args = _apply_config_file(args)
    np.seterr(over="warn")
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
