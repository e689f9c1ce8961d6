"""Graph-based Transformer reranker with pseudo relevance feedback.

Submodules:

* ``autodiff`` — minimal tape-based tensor library
* ``textdata`` — tokenization, vocabulary, corpus/qrels/run IO, synthetic data
* ``retrieval`` — inverted index, BM25 (+ parameter sweep), RM3 expansion
* ``graphs`` — node/graph assembly for all graph variants and baselines
* ``model`` — the encoder with inter-node [CLS] attention, baselines
* ``flops`` — analytic multiply+add accounting
* ``metrics`` — NDCG@10, MAP@10, MAP@100
* ``training`` — Adam training loop and reranking pipeline
* ``cli`` — command line entry point
"""

from .autodiff import Tape, Tensor, backward, grad_check
from .flops import FlopReport, count_flops
from .graphs import PgtGraph, VARIANTS, build_bertprf_input, build_graph
from .metrics import EvalResult, evaluate, map_at_k, ndcg_at_k
from .model import ModelConfig, PgtWeights, forward_bert, forward_pgt, init_weights
from .retrieval import InvertedIndex, bm25_search, build_index, rm3_expand, sweep_bm25
from .textdata import (
    Corpus,
    Qrels,
    TrainingExample,
    Vocabulary,
    build_vocab,
    generate_synthetic_corpus,
    sample_training_pairs,
    tokenize,
)
from .training import TrainConfig, rerank, train

__all__ = [
    "Tape", "Tensor", "backward", "grad_check",
    "FlopReport", "count_flops",
    "PgtGraph", "VARIANTS", "build_bertprf_input", "build_graph",
    "EvalResult", "evaluate", "map_at_k", "ndcg_at_k",
    "ModelConfig", "PgtWeights", "forward_bert", "forward_pgt", "init_weights",
    "InvertedIndex", "bm25_search", "build_index", "rm3_expand", "sweep_bm25",
    "Corpus", "Qrels", "TrainingExample", "Vocabulary", "build_vocab",
    "generate_synthetic_corpus", "sample_training_pairs", "tokenize",
    "TrainConfig", "rerank", "train",
]

__version__ = "0.1.0"
