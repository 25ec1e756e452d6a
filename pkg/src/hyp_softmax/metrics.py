"""Verification metrics (EER, minDCF) and trial scoring backends."""
import logging
from itertools import combinations
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy.stats import spearmanr

from .errors import ArgumentError, DegenerateInputError
from .geometry import DEFAULT_POLICY, fitting_curvature, pairwise_distance, project_rows, score_pairs
from .losses import DISTANCE_CURVATURE
from .models import Curvature, DcfParams, LossConfig, ScoringBackend, StabilityPolicy, TrialScores

logger = logging.getLogger(__name__)


# Scoring backends

def score_cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity a.b / (|a| |b|)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateInputError("Cosine score is undefined for zero-norm vectors")
    return float(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))


def score_hyperbolic(a: np.ndarray, b: np.ndarray, c: Union[Curvature, float],
                     policy: StabilityPolicy = DEFAULT_POLICY) -> float:
    """Negative hyperbolic distance (unit-curvature ball) between proj(a) and proj(b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ArgumentError(f"Expected two vectors of equal length, got {a.shape} and {b.shape}")
    return float(score_pairs(a[None, :], b[None, :], c, policy, DISTANCE_CURVATURE)[0])


def score_rows(a: np.ndarray, b: np.ndarray, backend: ScoringBackend, cfg: LossConfig) -> np.ndarray:
    """Score row i of ``a`` against row i of ``b`` with the chosen backend."""
    backend = ScoringBackend(backend)
    if backend == ScoringBackend.HYPERBOLIC:
        return score_pairs(a, b, cfg.c, cfg.policy, DISTANCE_CURVATURE)

    norms_a = np.linalg.norm(a, axis=1)
    norms_b = np.linalg.norm(b, axis=1)
    if np.any(norms_a == 0.0) or np.any(norms_b == 0.0):
        raise DegenerateInputError("Cosine score is undefined for zero-norm embeddings")
    return np.clip(np.sum(a * b, axis=1) / (norms_a * norms_b), -1.0, 1.0)


# Threshold sweep

def _sweep(scores: TrialScores):
    """Error counts at every candidate threshold.

    Candidates are -inf, the midpoints between adjacent distinct scores, and +inf.
    A trial is accepted when its score is >= the threshold, so misses are targets
    below it and false alarms are non-targets at or above it.
    """
    targets = np.sort(np.asarray(scores.target_scores, dtype=np.float64))
    nontargets = np.sort(np.asarray(scores.nontarget_scores, dtype=np.float64))
    if targets.size == 0 or nontargets.size == 0:
        raise ArgumentError("Both target and non-target score lists must be non-empty")
    if not (np.all(np.isfinite(targets)) and np.all(np.isfinite(nontargets))):
        raise ArgumentError("Scores must be finite")

    values = np.unique(np.concatenate([targets, nontargets]))
    # counts of scores <= each distinct value; the threshold after value k sits above it
    misses = np.concatenate([[0], np.searchsorted(targets, values, side='right')])
    false_alarms = nontargets.size - np.concatenate([[0], np.searchsorted(nontargets, values, side='right')])
    thresholds = np.concatenate([[-np.inf], (values[:-1] + values[1:]) / 2.0, [np.inf]])
    return misses, false_alarms, targets.size, nontargets.size, thresholds


def compute_eer(scores: TrialScores) -> Tuple[float, float]:
    """Equal error rate and the threshold where it is attained.

    Picks the threshold minimizing |FAR - FRR| and reports (FAR + FRR) / 2 there.
    Ties on the gap go to the smaller FAR + FRR, which keeps the result unchanged
    when scores are negated and the two lists swapped.
    """
    misses, false_alarms, n_target, n_nontarget, thresholds = _sweep(scores)
    # integer arithmetic on the common denominator n_target * n_nontarget
    gap = np.abs(misses * n_nontarget - false_alarms * n_target)
    total = misses * n_nontarget + false_alarms * n_target
    best = int(np.lexsort((total, gap))[0])

    frr = misses[best] / n_target
    far = false_alarms[best] / n_nontarget
    eer = (frr + far) / 2.0
    logger.debug(f"EER {eer:.6f} at threshold {thresholds[best]} (FRR {frr:.6f}, FAR {far:.6f})")
    return float(eer), float(thresholds[best])


def detection_cost(p_miss: np.ndarray, p_fa: np.ndarray, params: DcfParams) -> np.ndarray:
    """Normalized detection cost for given miss and false-alarm rates."""
    cost = params.c_miss * p_miss * params.p_target + params.c_fa * p_fa * (1.0 - params.p_target)
    return cost / min(params.c_miss * params.p_target, params.c_fa * (1.0 - params.p_target))


def compute_min_dcf(scores: TrialScores, params: Optional[DcfParams] = None) -> Tuple[float, float]:
    """Minimum normalized detection cost over all thresholds, and its threshold."""
    params = params or DcfParams()
    misses, false_alarms, n_target, n_nontarget, thresholds = _sweep(scores)
    costs = detection_cost(misses / n_target, false_alarms / n_nontarget, params)
    best = int(np.argmin(costs))
    return float(costs[best]), float(thresholds[best])


# Hierarchy diagnostic

def tree_distance(path_a: Tuple[int, ...], path_b: Tuple[int, ...]) -> int:
    """Number of levels from either leaf up to their lowest common ancestor."""
    shared = 0
    for step_a, step_b in zip(path_a, path_b):
        if step_a != step_b:
            break
        shared += 1
    return max(len(path_a), len(path_b)) - shared


def hierarchy_correlation(centers: np.ndarray, class_tree: Dict[int, Tuple[int, ...]],
                          backend: ScoringBackend, cfg: LossConfig) -> Optional[float]:
    """Spearman correlation between class-center distances and tree distances.

    Returns None when the tree carries no information (fewer than two distinct
    tree distances, as for flat label sets).
    """
    centers = np.asarray(centers, dtype=np.float64)
    classes = sorted(class_tree)
    pairs = list(combinations(classes, 2))
    if not pairs:
        return None

    tree = np.array([tree_distance(class_tree[i], class_tree[j]) for i, j in pairs], dtype=np.float64)
    if np.unique(tree).size < 2:
        return None

    if ScoringBackend(backend) == ScoringBackend.HYPERBOLIC:
        ball = project_rows(centers, fitting_curvature(cfg.c, DISTANCE_CURVATURE), cfg.policy)
        matrix = pairwise_distance(ball, ball, DISTANCE_CURVATURE, cfg.policy)
    else:
        unit = centers / np.maximum(np.linalg.norm(centers, axis=1, keepdims=True), 1e-12)
        matrix = 1.0 - unit @ unit.T
    learned = np.array([matrix[i, j] for i, j in pairs])

    rho, _ = spearmanr(learned, tree)
    return None if np.isnan(rho) else float(rho)
