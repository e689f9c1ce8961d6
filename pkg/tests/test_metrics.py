"""Ranking metrics against closed forms and a brute-force oracle."""

import math

import numpy as np
import pytest

from pgt import metrics as mt
from pgt.textdata import Qrels


def oracle_ndcg(ranked, grades, k):
    """Direct DCG formula, independently written."""
    gains = [(2 ** grades.get(d, 0) - 1) / math.log2(i + 2) for i, d in enumerate(ranked[:k])]
    ideal_grades = sorted(grades.values(), reverse=True)[:k]
    ideal = [(2 ** g - 1) / math.log2(i + 2) for i, g in enumerate(ideal_grades)]
    if sum(ideal) == 0:
        return None
    return sum(gains) / sum(ideal)


def oracle_ap(ranked, grades, k, threshold):
    rel = [d for d, g in grades.items() if g >= threshold]
    if not rel:
        return None
    precisions = []
    hits = 0
    for i, d in enumerate(ranked[:k], start=1):
        if d in rel:
            hits += 1
            precisions.append(hits / i)
    return sum(precisions) / len(rel)


class TestNdcg:
    def test_perfect_ordering(self):
        grades = {"d1": 3, "d2": 2, "d3": 0}
        assert mt.ndcg_at_k(["d1", "d2", "d3"], grades) == pytest.approx(1.0)

    def test_grade3_at_rank_two_closed_form(self):
        grades = {"d1": 0, "d2": 3}
        value = mt.ndcg_at_k(["d1", "d2"], grades)
        assert value == pytest.approx(7 / math.log2(3) / 7, abs=1e-12)
        assert value == pytest.approx(0.6309, abs=1e-4)

    def test_all_zero_grades_excluded(self):
        assert mt.ndcg_at_k(["d1"], {"d1": 0}) is None


class TestMap:
    def test_single_relevant_at_rank_two(self):
        assert mt.map_at_k(["d1", "d2"], {"d2": 1}, 10) == pytest.approx(0.5)

    def test_two_relevant_at_top(self):
        assert mt.map_at_k(["d1", "d2"], {"d1": 1, "d2": 1}, 10) == pytest.approx(1.0)

    def test_large_r_uncapped(self):
        # One hit at rank 1 but 95 relevant overall: AP@10 = 1/95.
        grades = {f"d{i}": 1 for i in range(95)}
        ranking = ["d0"] + [f"x{i}" for i in range(9)]
        assert mt.map_at_k(ranking, grades, 10) == pytest.approx(1 / 95)

    def test_no_relevant_excluded(self):
        assert mt.map_at_k(["d1"], {"d1": 0}, 10) is None

    def test_binarization_threshold(self):
        grades = {"d1": 1, "d2": 3}
        assert mt.map_at_k(["d1", "d2"], grades, 10, rel_threshold=2) == pytest.approx(0.5)


class TestEvaluate:
    def test_ideal_run_scores_one(self):
        qrels = Qrels({"q1": {"d1": 3, "d2": 1}})
        run = {"q1": [("d1", 2.0), ("d2", 1.0)]}
        assert mt.evaluate(run, qrels).mean("ndcg@10") == pytest.approx(1.0)

    def test_empty_intersection_gives_zero_map(self):
        qrels = Qrels({"q1": {"d1": 3}})
        run = {"q1": [("x1", 2.0), ("x2", 1.0)]}
        result = mt.evaluate(run, qrels)
        assert result.mean("map@10") == 0.0
        assert result.mean("map@100") == 0.0

    def test_hand_built_three_query_fixture(self):
        qrels = Qrels({
            "q1": {"d1": 3, "d2": 2},
            "q2": {"d3": 2},
            "q3": {"d4": 1},   # below threshold 2: excluded from MAP
        })
        run = {
            "q1": [("d2", 3.0), ("d1", 2.0)],
            "q2": [("x", 5.0), ("d3", 4.0)],
            "q3": [("d4", 1.0)],
        }
        result = mt.evaluate(run, qrels, rel_threshold=2)

        ndcg_q1 = (3 + 7 / math.log2(3)) / (7 + 3 / math.log2(3))
        ndcg_q2 = (3 / math.log2(3)) / 3
        assert result.mean("ndcg@10") == pytest.approx((ndcg_q1 + ndcg_q2 + 1.0) / 3)
        # q1: hits at ranks 1 and 2 -> AP 1.0; q2: hit at rank 2 of R=1 -> 0.5
        assert result.mean("map@10") == pytest.approx((1.0 + 0.5) / 2)

    def test_query_missing_from_qrels_warns_and_excluded(self):
        qrels = Qrels({"q1": {"d1": 1}})
        run = {"q1": [("d1", 1.0)], "q9": [("d1", 1.0)]}
        with pytest.warns(UserWarning, match="q9"):
            result = mt.evaluate(run, qrels, rel_threshold=1)
        assert "q9" not in result.per_query["ndcg@10"]

    def test_empty_run_rejected(self):
        with pytest.raises(ValueError):
            mt.evaluate({}, Qrels())


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", range(20))
    def test_fuzzed_against_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        docs = [f"d{i}" for i in range(n)]
        grades = {d: int(rng.integers(0, 4)) for d in docs}
        ranked = list(rng.permutation(docs))
        for k in (1, 3, 10, 100):
            a = mt.ndcg_at_k(ranked, grades, k)
            b = oracle_ndcg(ranked, grades, k)
            if a is None or b is None:
                assert a == b
            else:
                assert abs(a - b) <= 1e-9
            for thr in (1, 2):
                a = mt.map_at_k(ranked, grades, k, thr)
                b = oracle_ap(ranked, grades, k, thr)
                if a is None or b is None:
                    assert a == b
                else:
                    assert abs(a - b) <= 1e-9

    def test_invariant_to_monotone_score_transforms(self):
        qrels = Qrels({"q1": {"d1": 3, "d2": 1, "d3": 2}})
        base = {"q1": [("d2", 9.0), ("d1", 5.0), ("d3", 1.0)]}
        squashed = {"q1": [(d, math.tanh(s / 10)) for d, s in base["q1"]]}
        r1 = mt.evaluate(base, qrels)
        r2 = mt.evaluate(squashed, qrels)
        for m in ("ndcg@10", "map@10", "map@100"):
            assert r1.mean(m) == pytest.approx(r2.mean(m))


class TestFormatTable:
    def test_text_and_csv(self):
        qrels = Qrels({"q1": {"d1": 3}})
        run = {"q1": [("d1", 1.0)]}
        result = mt.evaluate(run, qrels)
        text = mt.format_table(result)
        assert "ndcg@10" in text and "1.0000" in text
        csv = mt.format_table(result, csv=True)
        assert csv.splitlines()[0] == "metric,mean,queries"
