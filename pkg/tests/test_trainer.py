"""Tests for the training loop and held-out evaluation."""
import csv

import numpy as np
import pytest

from src.hyp_softmax.embedder import Embedder
from src.hyp_softmax.errors import ArgumentError, DivergenceError, DomainError
from src.hyp_softmax.losses import default_curvature
from src.hyp_softmax.models import (EmbedderSpec, LossConfig, LossKind, LossOutput, OptimSpec, ScoringBackend,
                                    TreeSpec, TrialSet)
from src.hyp_softmax.synthdata import generate
from src.hyp_softmax.trainer import Trainer, default_scoring, evaluate, fit, train, write_report_csv


def small_setup(loss_kind=LossKind.HAM, epochs=3, lr0=0.01, seed=0):
    data = generate(TreeSpec(depth=2, branching=3, dim=8, samples_per_class=12, seed=seed))
    embedder = EmbedderSpec(input_dim=8, hidden_dim=16, output_dim=4, seed=seed + 1)
    optim = OptimSpec(lr0=lr0, epochs=epochs, batch_size=16, seed=seed + 2)
    loss_cfg = LossConfig(num_classes=9, dim=4, c=default_curvature(loss_kind))
    return data, embedder, optim, loss_cfg


class TestTrain:
    """Short runs on a small synthetic hierarchy."""

    def test_zero_epochs(self):
        """Without epochs the report holds only the untrained evaluation."""
        data, embedder, optim, loss_cfg = small_setup(epochs=0)
        report = train(data, embedder, optim, loss_cfg, LossKind.HAM, split_seed=3)
        assert report.records == []
        assert report.final_eer == report.initial_eer
        assert report.final_loss == report.initial_loss
        assert 0.0 <= report.initial_eer <= 1.0

    def test_zero_learning_rate(self):
        """lr0 = 0 leaves every parameter untouched and the loss flat."""
        data, embedder, optim, loss_cfg = small_setup(lr0=0.0)
        initial = Trainer(embedder, optim, loss_cfg, LossKind.HAM).params
        report, trainer, _ = fit(data, embedder, optim, loss_cfg, LossKind.HAM, split_seed=3)
        for name, value in initial.items():
            np.testing.assert_array_equal(trainer.params[name], value)
        for record in report.records:
            assert record.loss == pytest.approx(report.initial_loss, rel=1e-12)

    def test_schedule(self):
        """Recorded learning rates follow lr0 * decay^epoch."""
        data, embedder, optim, loss_cfg = small_setup(epochs=4)
        report = train(data, embedder, optim, loss_cfg, LossKind.H, split_seed=3)
        assert [record.epoch for record in report.records] == [0, 1, 2, 3]
        assert [record.lr for record in report.records] == [optim.lr0 * optim.decay ** k for k in range(4)]

    def test_deterministic(self):
        """Identical seeds reproduce the loss trace bit for bit."""
        data, embedder, optim, loss_cfg = small_setup()
        first = train(data, embedder, optim, loss_cfg, LossKind.JOINT_EH, split_seed=3)
        second = train(data, embedder, optim, loss_cfg, LossKind.JOINT_EH, split_seed=3)
        assert [r.loss for r in first.records] == [r.loss for r in second.records]
        assert [r.eer for r in first.records] == [r.eer for r in second.records]

    @pytest.mark.parametrize('kind', list(LossKind))
    def test_every_loss_trains(self, kind):
        """Each loss runs end to end and its loss goes down."""
        data, embedder, optim, loss_cfg = small_setup(loss_kind=kind, epochs=5)
        report = train(data, embedder, optim, loss_cfg, kind, split_seed=3)
        assert len(report.records) == 5
        assert report.records[-1].loss < report.initial_loss
        assert report.scoring == default_scoring(kind)

    def test_hierarchy_rho_recorded(self):
        """Trees with structure yield a correlation in [-1, 1]."""
        data, embedder, optim, loss_cfg = small_setup()
        report = train(data, embedder, optim, loss_cfg, LossKind.HAM, split_seed=3)
        assert -1.0 <= report.hierarchy_rho <= 1.0

    def test_dimension_mismatch(self):
        """Embedder output must match the loss dimension."""
        data, embedder, optim, _ = small_setup()
        with pytest.raises(ArgumentError):
            train(data, embedder, optim, LossConfig(num_classes=9, dim=5), LossKind.HAM)
        with pytest.raises(ArgumentError):
            train(data, EmbedderSpec(input_dim=7, hidden_dim=4, output_dim=4), optim,
                  LossConfig(num_classes=9, dim=4), LossKind.HAM)

    def test_divergence_names_epoch_and_batch(self, mocker):
        """A non-finite loss aborts with its location."""
        data, embedder, optim, loss_cfg = small_setup()

        def nan_loss(kind, batch, centers, cfg, centers_euc=None):
            return LossOutput(value=float('nan'), grad_embeddings=np.zeros_like(batch.embeddings),
                              grad_weights=np.zeros_like(centers.weights), logits=np.zeros((1, 1)))

        mocker.patch('src.hyp_softmax.trainer.compute_loss', side_effect=nan_loss)
        with pytest.raises(DivergenceError) as excinfo:
            train(data, embedder, optim, loss_cfg, LossKind.HAM, split_seed=3)
        assert excinfo.value.epoch == 0
        assert excinfo.value.batch == 0
        assert 'epoch 0, batch 0' in str(excinfo.value)

    def test_domain_error_reported_as_divergence(self, mocker):
        """A point pushed off the ball during training is a divergence, not bad input."""
        data, embedder, optim, loss_cfg = small_setup()
        mocker.patch('src.hyp_softmax.trainer.compute_loss',
                     side_effect=DomainError("x row 0 lies on or outside the ball of curvature 1.0"))
        with pytest.raises(DivergenceError) as excinfo:
            train(data, embedder, optim, loss_cfg, LossKind.H, split_seed=3)
        assert excinfo.value.epoch == 0
        assert excinfo.value.batch == 0
        assert 'outside the ball' in str(excinfo.value)

    @pytest.mark.parametrize('c', [0.01, 0.1, 1.0, 5.0])
    def test_curvature_range(self, c):
        """Every curvature of the usual sweep trains without failure."""
        data, embedder, optim, _ = small_setup(lr0=0.05)
        loss_cfg = LossConfig(num_classes=9, dim=4, c=c)
        report = train(data, embedder, optim, loss_cfg, LossKind.H, split_seed=3)
        assert all(np.isfinite(record.loss) for record in report.records)

    def test_report_csv(self, tmp_path):
        """One row per epoch with the documented columns."""
        data, embedder, optim, loss_cfg = small_setup(epochs=2)
        report = train(data, embedder, optim, loss_cfg, LossKind.AM, split_seed=3)
        path = tmp_path / 'report.csv'
        write_report_csv(report, str(path))
        with open(path, newline='') as f:
            rows = list(csv.DictReader(f))
        assert list(rows[0].keys()) == ['epoch', 'loss', 'lr', 'eer', 'min_dcf', 'wall_time_s']
        assert [int(row['epoch']) for row in rows] == [0, 1]
        assert float(rows[1]['loss']) == report.records[1].loss


class TestEvaluate:
    """Held-out verification of an embedder."""

    def setup_method(self):
        """Set up test fixtures."""
        self.rng = np.random.default_rng(5)
        self.embedder = Embedder(EmbedderSpec(input_dim=6, hidden_dim=12, output_dim=4, seed=2))
        self.cfg = LossConfig(num_classes=2, dim=4, c=1.0)

    def test_identical_targets(self):
        """Targets that are the same vector twice are perfectly separated from random pairs."""
        vectors = self.rng.standard_normal((40, 6))
        vectors[1::2][:10] = vectors[0::2][:10]
        pairs = np.array([[2 * i, 2 * i + 1] for i in range(20)])
        is_target = np.arange(20) < 10
        trials = TrialSet(vectors=vectors, labels=np.zeros(40, dtype=np.int64), pairs=pairs, is_target=is_target)
        for backend in ScoringBackend:
            eer, min_dcf = evaluate(self.embedder, trials, backend, self.cfg)
            assert eer == 0.0
            assert min_dcf == 0.0

    def test_shuffled_labels(self):
        """An untrained embedder on randomly labeled trials is at chance."""
        vectors = self.rng.standard_normal((400, 6))
        pairs = self.rng.integers(0, 400, size=(4000, 2))
        is_target = self.rng.random(4000) < 0.5
        trials = TrialSet(vectors=vectors, labels=np.zeros(400, dtype=np.int64), pairs=pairs, is_target=is_target)
        for backend in ScoringBackend:
            eer, _ = evaluate(self.embedder, trials, backend, self.cfg)
            assert abs(eer - 0.5) < 0.05

    def test_empty_trials(self):
        """There is nothing to evaluate without trials."""
        trials = TrialSet(vectors=np.ones((2, 6)), labels=np.zeros(2, dtype=np.int64),
                          pairs=np.zeros((0, 2), dtype=np.int64), is_target=np.zeros(0, dtype=bool))
        with pytest.raises(ArgumentError):
            evaluate(self.embedder, trials, ScoringBackend.COSINE, self.cfg)


@pytest.mark.slow
class TestDeskScale:
    """Default 64-class hierarchy with the shipped seeds."""

    def setup_method(self):
        """Set up test fixtures."""
        self.data = generate(TreeSpec(seed=0))
        self.embedder = EmbedderSpec(seed=1)

    def run(self, kind, epochs=30):
        optim = OptimSpec(epochs=epochs, seed=2)
        cfg = LossConfig(num_classes=64, dim=16, c=default_curvature(kind))
        return train(self.data, self.embedder, optim, cfg, kind, split_seed=3)

    @pytest.mark.parametrize('kind', list(LossKind))
    def test_descent(self, kind):
        """Epoch-10 loss is below the epoch-0 loss for every loss kind."""
        report = self.run(kind, epochs=11)
        assert report.records[10].loss < report.records[0].loss

    def test_hyperbolic_losses_beat_plain_softmax(self):
        """H- and HAM-Softmax reach a low held-out EER and beat unscaled softmax."""
        baseline = self.run(LossKind.SOFTMAX)
        for kind in (LossKind.H, LossKind.HAM):
            report = self.run(kind)
            assert report.final_loss < report.initial_loss
            assert report.final_eer < 0.10
            assert report.final_eer < baseline.final_eer
