"""Vocabulary, tokenization, file IO, training pairs, synthetic corpus."""

import numpy as np
import pytest

from pgt import textdata as td


class TestVocab:
    def test_hand_counted_size(self):
        vocab = td.build_vocab(td.Corpus({"d1": "A a b."}), min_freq=1)
        assert vocab.size == 6
        assert set(vocab.id_to_token[:4]) == set(td.RESERVED)
        assert "a" in vocab.token_to_id and "b" in vocab.token_to_id

    def test_empty_after_filtering(self):
        vocab = td.build_vocab(td.Corpus({"d1": "a b c"}), min_freq=5)
        assert vocab.size == 4

    def test_min_freq_filter(self):
        vocab = td.build_vocab(td.Corpus({"d1": "a a b"}), min_freq=2)
        assert "a" in vocab.token_to_id
        assert "b" not in vocab.token_to_id

    def test_reserved_ids(self):
        vocab = td.build_vocab(td.Corpus({"d1": "x"}))
        assert vocab.token_to_id[td.PAD] == td.PAD_ID
        assert vocab.token_to_id[td.CLS] == td.CLS_ID

    def test_ordering_frequency_then_lexicographic(self):
        vocab = td.build_vocab(td.Corpus({"d1": "b b a c c"}))
        # b and c tie on frequency 2; b sorts first; a has frequency 1.
        assert vocab.id_to_token[4:] == ["b", "c", "a"]

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            td.build_vocab(td.Corpus({}))


class TestTokenize:
    def test_rule_set_golden(self):
        assert td.tokenize_text("Hello, World! it's 42.") == ["hello", "world", "it", "s", "42"]

    def test_empty(self):
        vocab = td.build_vocab(td.Corpus({"d1": "a b"}))
        assert td.tokenize("", vocab) == []

    def test_known_tokens(self):
        vocab = td.build_vocab(td.Corpus({"d1": "a b"}))
        assert td.tokenize("a b", vocab) == [vocab.token_to_id["a"], vocab.token_to_id["b"]]

    def test_unknown_maps_to_unk(self):
        vocab = td.build_vocab(td.Corpus({"d1": "a b"}))
        assert td.tokenize("a zzz", vocab) == [vocab.token_to_id["a"], td.UNK_ID]

    def test_pure_function(self):
        vocab = td.build_vocab(td.Corpus({"d1": "a b c"}))
        assert td.tokenize("a c b", vocab) == td.tokenize("a c b", vocab)


class TestFileIO:
    def test_corpus_line(self, tmp_path):
        p = tmp_path / "c.tsv"
        p.write_text("d1\thello world\n")
        corpus = td.load_tsv_corpus(p)
        assert corpus["d1"] == "hello world"

    def test_qrels_line(self, tmp_path):
        p = tmp_path / "q.txt"
        p.write_text("q1 0 d1 2\n")
        assert td.load_trec_qrels(p).grade("q1", "d1") == 2

    def test_run_line(self, tmp_path):
        p = tmp_path / "r.txt"
        p.write_text("q1 Q0 d9 1 12.5 tag\n")
        assert td.load_trec_run(p)["q1"] == [("d9", 12.5)]

    def test_malformed_line_reports_lineno(self, tmp_path):
        p = tmp_path / "c.tsv"
        p.write_text("d1\tok\nbroken-line\n")
        with pytest.raises(td.ParseError, match=":2:"):
            td.load_tsv_corpus(p)

    def test_duplicate_doc_id(self, tmp_path):
        p = tmp_path / "c.tsv"
        p.write_text("d1\ta\nd1\tb\n")
        with pytest.raises(td.ParseError, match="duplicate"):
            td.load_tsv_corpus(p)

    def test_round_trip(self, tmp_path):
        corpus = td.Corpus({"d1": "alpha beta", "d2": "gamma"})
        queries = {"q1": "alpha", "q2": "beta gamma"}
        qrels = td.Qrels({"q1": {"d1": 2, "d2": 0}, "q2": {"d2": 3}})
        run = {"q1": [("d1", 2.5), ("d2", 1.25)], "q2": [("d2", 0.5)]}

        td.write_tsv_corpus(corpus, tmp_path / "c.tsv")
        td.write_tsv_queries(queries, tmp_path / "q.tsv")
        td.write_trec_qrels(qrels, tmp_path / "qr.txt")
        td.write_trec_run(run, tmp_path / "run.txt")

        assert td.load_tsv_corpus(tmp_path / "c.tsv").docs == corpus.docs
        assert td.load_tsv_queries(tmp_path / "q.tsv") == queries
        assert td.load_trec_qrels(tmp_path / "qr.txt").grades == qrels.grades
        assert td.load_trec_run(tmp_path / "run.txt") == run


class TestTrainingPairs:
    def _fixture(self):
        qrels = td.Qrels({"q1": {"d1": 3, "d2": 2, "d3": 1}})
        run = {"q1": [(f"d{i}", 100.0 - i) for i in range(1, 101)]}
        return qrels, run

    def test_one_to_one_balance(self):
        qrels, run = self._fixture()
        examples = td.sample_training_pairs(qrels, run, rel_threshold=2, seed=0)
        pos = [e for e in examples if e.label == 1]
        neg = [e for e in examples if e.label == 0]
        assert len(pos) == len(neg) == 2

    def test_query_without_positives_excluded(self):
        qrels = td.Qrels({"q1": {"d1": 1}})
        run = {"q1": [("d1", 1.0), ("d2", 0.5)]}
        assert td.sample_training_pairs(qrels, run, rel_threshold=2, seed=0) == []

    def test_deterministic_under_seed(self):
        qrels, run = self._fixture()
        a = td.sample_training_pairs(qrels, run, seed=13)
        b = td.sample_training_pairs(qrels, run, seed=13)
        assert a == b

    def test_balance_property_per_query(self):
        rng = np.random.default_rng(5)
        qrels = td.Qrels()
        run = {}
        for qi in range(8):
            qid = f"q{qi}"
            docs = [f"d{qi}_{i}" for i in range(30)]
            for d in docs[: int(rng.integers(0, 6))]:
                qrels.set(qid, d, int(rng.integers(2, 4)))
            run[qid] = [(d, float(30 - i)) for i, d in enumerate(docs)]
        examples = td.sample_training_pairs(qrels, run, seed=1)
        for qid in run:
            labels = [e.label for e in examples if e.query_id == qid]
            assert labels.count(1) == labels.count(0)


class TestSynthetic:
    def test_every_query_has_relevant_doc(self):
        _, queries, qrels = td.generate_synthetic_corpus(50, 2, seed=0)
        for qid in queries:
            assert any(g >= 1 for g in qrels.grades.get(qid, {}).values())

    def test_same_seed_identical(self):
        a = td.generate_synthetic_corpus(60, 3, seed=7)
        b = td.generate_synthetic_corpus(60, 3, seed=7)
        assert a[0].docs == b[0].docs and a[1] == b[1] and a[2].grades == b[2].grades

    def test_grade3_has_strictly_more_topic_tokens_than_grade1(self):
        corpus, _, qrels = td.generate_synthetic_corpus(400, 10, seed=3)
        for qid, judged in qrels.grades.items():
            topic_prefix = f"t{int(qid[1:]):03d}x"
            counts = {}
            for doc_id, grade in judged.items():
                n_topic = len(
                    {t for t in td.tokenize_text(corpus[doc_id]) if t.startswith(topic_prefix)}
                )
                counts.setdefault(grade, []).append(n_topic)
            if 3 in counts and 1 in counts:
                assert min(counts[3]) > max(counts[1])

    def test_distractors_contain_no_topic_tokens(self):
        corpus, _, qrels = td.generate_synthetic_corpus(200, 4, seed=2)
        judged = {d for q in qrels.grades.values() for d in q}
        for doc_id, text in corpus.docs.items():
            if doc_id not in judged:
                assert not any(t.startswith("t") and "x" in t for t in td.tokenize_text(text))

    def test_doc_count(self):
        corpus, _, _ = td.generate_synthetic_corpus(123, 4, seed=0)
        assert corpus.num_docs == 123
