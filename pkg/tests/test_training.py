"""Training loop, optimizer behaviour, and reranking contracts."""

import numpy as np
import pytest

from pgt.graphs import build_graph
from pgt.model import ModelConfig, forward_pgt, init_weights
from pgt.training import (
    TrainConfig,
    TrainingDiverged,
    feedback_docs,
    rerank,
    train,
    write_loss_curve,
)


def toy_config(**overrides):
    defaults = dict(
        num_layers=2, hidden_size=16, num_heads=2, ffn_size=32, vocab_size=40,
        max_node_len=16, max_seq_len=16, dropout=0.0, seed=3,
    )
    defaults.update(overrides)
    return ModelConfig(**defaults)


def toy_dataset(n=32):
    """Positives carry marker token 20 in the candidate; negatives token 21."""
    inputs = []
    for i in range(n):
        label = i % 2
        marker = 20 if label else 21
        dc = [marker, 10 + (i % 5)]
        g = build_graph([5, 6], dc, [[12, 13], [14]], "base", 16)
        inputs.append((g, label))
    return inputs


class TestTrain:
    def test_lr_zero_leaves_weights_unchanged(self):
        cfg = toy_config()
        w = init_weights(cfg)
        before = {name: t.data.copy() for name, t in w.parameters()}
        curve = train(toy_dataset(8), w, cfg, TrainConfig(epochs=2, lr=0.0, seed=0))
        for name, t in w.parameters():
            assert np.array_equal(before[name], t.data), name
        losses = [loss for _, _, loss in curve]
        assert max(losses) - min(losses) <= 1e-6

    def test_overfits_toy_set(self):
        cfg = toy_config()
        w = init_weights(cfg)
        inputs = toy_dataset(32)
        # 32 examples, batch 8 -> 4 steps/epoch; 50 epochs = 200 steps.
        curve = train(inputs, w, cfg, TrainConfig(epochs=50, batch_size=8, lr=5e-3, seed=0))
        assert len(curve) == 200
        assert curve[-1][2] <= 0.05

    def test_same_seed_identical_loss_curve(self):
        cfg = toy_config()
        curves = []
        for _ in range(2):
            w = init_weights(cfg)
            curves.append(train(toy_dataset(8), w, cfg,
                                TrainConfig(epochs=2, batch_size=4, lr=1e-3, seed=9)))
        assert curves[0] == curves[1]

    def test_lr_decays_linearly_to_zero(self):
        cfg = toy_config()
        w = init_weights(cfg)
        curve = train(toy_dataset(8), w, cfg,
                      TrainConfig(epochs=2, batch_size=4, lr=1e-3, seed=0))
        lrs = [lr for _, lr, _ in curve]
        total = len(curve)
        expected = [1e-3 * (1 - s / total) for s in range(total)]
        np.testing.assert_allclose(lrs, expected)

    def test_nan_loss_aborts_with_step(self):
        cfg = toy_config()
        w = init_weights(cfg)
        w["score.W"].data[:] = np.inf
        with pytest.raises(TrainingDiverged, match="step 0"):
            train(toy_dataset(8), w, cfg, TrainConfig(epochs=1, lr=1e-3))

    def test_empty_inputs_rejected(self):
        cfg = toy_config()
        with pytest.raises(ValueError):
            train([], init_weights(cfg), cfg, TrainConfig())

    def test_loss_curve_csv(self, tmp_path):
        path = tmp_path / "loss.csv"
        write_loss_curve([(0, 1e-3, 0.7), (1, 5e-4, 0.6)], path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "step,lr,loss"
        assert lines[1].startswith("0,0.001,")


class TestTrainConfig:
    def test_invalid_values(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(lr=-1.0)
        with pytest.raises(ValueError):
            TrainConfig(k=0)


class TestRerank:
    RUN = {"q1": [("d1", 9.0), ("d2", 8.0), ("d3", 7.0), ("d4", 6.0)]}

    def test_depth_one_keeps_order(self):
        out = rerank(self.RUN, 1, lambda q, d: 123.0)
        assert [d for d, _ in out["q1"]] == ["d1", "d2", "d3", "d4"]

    def test_passthrough_scorer_is_identity(self):
        first_stage = {d: s for d, s in self.RUN["q1"]}
        out = rerank(self.RUN, 4, lambda q, d: first_stage[d])
        assert out == self.RUN

    def test_partial_depth_preserves_tail(self):
        run = {"q1": [(f"d{i}", 1000.0 - i) for i in range(1000)]}
        out = rerank(run, 500, lambda q, d: float(int(d[1:])))
        head = [d for d, _ in out["q1"][:500]]
        tail = [d for d, _ in out["q1"][500:]]
        assert head == [f"d{i}" for i in reversed(range(500))]
        assert tail == [f"d{i}" for i in range(500, 1000)]

    def test_ties_break_by_doc_id(self):
        out = rerank(self.RUN, 4, lambda q, d: 1.0)
        assert [d for d, _ in out["q1"]] == ["d1", "d2", "d3", "d4"]

    def test_idempotent_at_full_depth(self):
        scorer = lambda q, d: float(hash(d) % 97)
        once = rerank(self.RUN, 10_000, scorer)
        twice = rerank(once, 10_000, scorer)
        assert once == twice

    def test_invalid_depth(self):
        with pytest.raises(ValueError):
            rerank(self.RUN, 0, lambda q, d: 0.0)


class TestFeedbackDocs:
    RUN = {"q1": [("d1", 3.0), ("d2", 2.0), ("d3", 1.0)]}

    def test_top_k(self):
        assert feedback_docs(self.RUN, "q1", 2) == ["d1", "d2"]

    def test_candidate_excluded(self):
        assert feedback_docs(self.RUN, "q1", 2, exclude="d1") == ["d2", "d3"]

    def test_shallow_run_returns_available(self):
        assert feedback_docs(self.RUN, "q1", 9) == ["d1", "d2", "d3"]
