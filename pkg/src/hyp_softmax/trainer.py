"""Minibatch training of an embedder and class centers under any softmax-family loss."""
import csv
import logging
import time
from typing import Dict, Optional, Tuple

import numpy as np

from .config import Config
from .embedder import Embedder
from .errors import ArgumentError, DivergenceError, DomainError
from .losses import compute_loss
from .metrics import compute_eer, compute_min_dcf, hierarchy_correlation, score_rows
from .models import (Batch, ClassCenters, DcfParams, EmbedderSpec, EpochRecord, LabeledDataset,
                     LossConfig, LossKind, OptimSpec, ScoringBackend, TrainReport, TrialScores, TrialSet)
from .optim import Adam
from .synthdata import make_rng, split

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ['epoch', 'loss', 'lr', 'eer', 'min_dcf', 'wall_time_s']


def default_scoring(kind: LossKind) -> ScoringBackend:
    """Hyperbolic scoring for losses that train in the ball, cosine otherwise."""
    return ScoringBackend.HYPERBOLIC if LossKind(kind).is_hyperbolic else ScoringBackend.COSINE


def trial_scores(embedder: Embedder, trials: TrialSet, scoring: ScoringBackend, cfg: LossConfig) -> np.ndarray:
    """Score every trial pair of ``trials`` with the current embedder."""
    if len(trials) == 0:
        raise ArgumentError("Trial list is empty")
    embeddings = embedder.embed(trials.vectors)
    return score_rows(embeddings[trials.pairs[:, 0]], embeddings[trials.pairs[:, 1]], scoring, cfg)


def evaluate(embedder: Embedder, trials: TrialSet, scoring: ScoringBackend, cfg: LossConfig,
             dcf: Optional[DcfParams] = None) -> Tuple[float, float]:
    """EER and minDCF of the embedder on held-out trials."""
    scores = trial_scores(embedder, trials, scoring, cfg)
    split_scores = TrialScores(target_scores=scores[trials.is_target],
                               nontarget_scores=scores[~trials.is_target])
    eer, _ = compute_eer(split_scores)
    min_dcf, _ = compute_min_dcf(split_scores, dcf)
    return eer, min_dcf


class Trainer:
    """Holds the embedder, the class centers and the optimizer state of one training run."""

    def __init__(self, embedder_spec: EmbedderSpec, optim: OptimSpec, loss_cfg: LossConfig, loss_kind: LossKind):
        self.loss_kind = LossKind(loss_kind)
        if embedder_spec.output_dim != loss_cfg.dim:
            raise ArgumentError(f"Embedder output_dim {embedder_spec.output_dim} does not match loss dim {loss_cfg.dim}")
        self.loss_cfg = loss_cfg
        self.optim = optim
        self.embedder = Embedder(embedder_spec)
        self.rng = make_rng(optim.seed)

        self.params: Dict[str, np.ndarray] = dict(self.embedder.params)
        shape = (loss_cfg.num_classes, loss_cfg.dim)
        self.params['centers'] = Config.CENTER_INIT_STD * self.rng.standard_normal(shape)
        if self.loss_kind == LossKind.JOINT_EH and not loss_cfg.share_centers:
            self.params['centers_euc'] = Config.CENTER_INIT_STD * self.rng.standard_normal(shape)
        self.adam = Adam(optim)

    @property
    def centers(self) -> np.ndarray:
        return self.params['centers']

    def _loss(self, x: np.ndarray, labels: np.ndarray):
        embeddings, cache = self.embedder.forward(x)
        if not np.all(np.isfinite(embeddings)):
            raise DivergenceError("Non-finite embeddings")
        centers_euc = self.params.get('centers_euc')
        out = compute_loss(self.loss_kind, Batch(embeddings=embeddings, labels=labels),
                           ClassCenters(self.params['centers']), self.loss_cfg,
                           ClassCenters(centers_euc) if centers_euc is not None else None)
        return out, cache

    def mean_loss(self, data: LabeledDataset) -> float:
        """Sample-weighted mean loss over ``data`` at the current parameters."""
        total = 0.0
        for start in range(0, len(data.labels), self.optim.batch_size):
            stop = start + self.optim.batch_size
            out, _ = self._loss(data.vectors[start:stop], data.labels[start:stop])
            total += out.value * len(data.labels[start:stop])
        return total / len(data.labels)

    def _step(self, x: np.ndarray, labels: np.ndarray, lr: float) -> float:
        out, cache = self._loss(x, labels)
        if not np.isfinite(out.value):
            raise DivergenceError(f"Non-finite {self.loss_kind.value} loss")
        grads = self.embedder.backward(cache, out.grad_embeddings)
        grads['centers'] = out.grad_weights
        if 'centers_euc' in self.params:
            grads['centers_euc'] = out.grad_weights_euclidean
        self.adam.step(self.params, grads, lr)
        return out.value

    def run_epoch(self, data: LabeledDataset, epoch: int) -> float:
        """One shuffled pass over ``data``; returns the sample-weighted mean loss."""
        lr = self.optim.learning_rate(epoch)
        order = self.rng.permutation(len(data.labels))
        total = 0.0
        for batch_index, start in enumerate(range(0, len(order), self.optim.batch_size)):
            idx = order[start:start + self.optim.batch_size]
            try:
                total += self._step(data.vectors[idx], data.labels[idx], lr) * len(idx)
            except DivergenceError as e:
                raise DivergenceError(e.message, epoch, batch_index) from e
            except DomainError as e:
                raise DivergenceError(str(e), epoch, batch_index) from e
        return total / len(order)


def fit(data: LabeledDataset, embedder: EmbedderSpec, optim: OptimSpec, loss_cfg: LossConfig,
        loss_kind: LossKind, *, scoring: Optional[ScoringBackend] = None,
        train_frac: float = Config.TRAIN_FRAC, trials_per_class: int = Config.TRIALS_PER_CLASS,
        split_seed: int = 0, dcf: Optional[DcfParams] = None,
        trials: Optional[TrialSet] = None) -> Tuple[TrainReport, Trainer, TrialSet]:
    """Train on a stratified split of ``data`` and evaluate on its held-out trials.

    When ``trials`` is given, ``data`` is used whole for training and ``trials``
    for evaluation. The untrained state is evaluated first, then every epoch.

    Raises:
        ArgumentError: On inconsistent dimensions or labels outside the loss's classes
        DivergenceError: On a non-finite loss or gradient, naming epoch and batch
    """
    loss_kind = LossKind(loss_kind)
    scoring = ScoringBackend(scoring) if scoring is not None else default_scoring(loss_kind)
    if data.dim != embedder.input_dim:
        raise ArgumentError(f"Data dimension {data.dim} does not match embedder input_dim {embedder.input_dim}")
    if data.num_classes > loss_cfg.num_classes:
        raise ArgumentError(f"Data has {data.num_classes} classes but the loss has {loss_cfg.num_classes}")

    if trials is None:
        train_data, trials = split(data, train_frac, split_seed, trials_per_class)
    else:
        train_data = data
    trainer = Trainer(embedder, optim, loss_cfg, loss_kind)

    initial_loss = trainer.mean_loss(train_data)
    initial_eer, initial_min_dcf = evaluate(trainer.embedder, trials, scoring, loss_cfg, dcf)
    report = TrainReport(loss_kind=loss_kind, scoring=scoring, initial_loss=initial_loss,
                         initial_eer=initial_eer, initial_min_dcf=initial_min_dcf)
    logger.info(f"{loss_kind.value}: initial loss {initial_loss:.4f}, EER {initial_eer:.4f} ({scoring.value} scoring)")

    for epoch in range(optim.epochs):
        started = time.perf_counter()
        loss = trainer.run_epoch(train_data, epoch)
        try:
            eer, min_dcf = evaluate(trainer.embedder, trials, scoring, loss_cfg, dcf)
        except DomainError as e:
            raise DivergenceError(f"Held-out evaluation failed: {e}", epoch) from e
        record = EpochRecord(epoch=epoch, loss=loss, lr=optim.learning_rate(epoch),
                             wall_time_s=time.perf_counter() - started, eer=eer, min_dcf=min_dcf)
        report.records.append(record)
        logger.info(f"Epoch {epoch}: loss {loss:.4f}, lr {record.lr:.6g}, EER {eer:.4f}, minDCF {min_dcf:.4f}")

    report.hierarchy_rho = hierarchy_correlation(trainer.centers, train_data.class_tree, scoring, loss_cfg)
    return report, trainer, trials


def train(data: LabeledDataset, embedder: EmbedderSpec, optim: OptimSpec, loss_cfg: LossConfig,
          loss_kind: LossKind, **kwargs) -> TrainReport:
    """Same as ``fit`` but returns only the report."""
    report, _, _ = fit(data, embedder, optim, loss_cfg, loss_kind, **kwargs)
    return report


def write_report_csv(report: TrainReport, path: str):
    """Write one row per epoch record."""
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=REPORT_COLUMNS, lineterminator='\n')
        writer.writeheader()
        for record in report.records:
            writer.writerow({
                'epoch': record.epoch,
                'loss': repr(float(record.loss)),
                'lr': repr(float(record.lr)),
                'eer': repr(float(record.eer)),
                'min_dcf': repr(float(record.min_dcf)),
                'wall_time_s': f"{record.wall_time_s:.3f}",
            })
