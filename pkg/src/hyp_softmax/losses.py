"""Softmax-family losses with analytic gradients.

Every loss returns a ``LossOutput`` holding the mean cross-entropy over the batch,
the gradient w.r.t. the embeddings and the class centers, and the logits.
Hyperbolic losses project embeddings and centers into the ball of curvature
``cfg.c`` and measure distances in the unit-curvature ball. For c < 1 the
projection radius is capped at that of the unit ball.
"""
import logging
import math
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from .config import Config
from .errors import ArgumentError, DegenerateInputError
from .geometry import (fitting_curvature, pairwise_distance, pairwise_distance_backward, project_rows,
                       project_rows_backward)
from .models import Batch, ClassCenters, LossConfig, LossKind, LossOutput

logger = logging.getLogger(__name__)

# Distances inside the hyperbolic losses always use the standard ball
DISTANCE_CURVATURE = 1.0


def default_curvature(kind: LossKind) -> float:
    """Curvature used when an experiment does not set one."""
    if LossKind(kind) == LossKind.H:
        return Config.CURVATURE_H_SOFTMAX
    return Config.CURVATURE_HAM_SOFTMAX


def _check_inputs(batch: Batch, centers: ClassCenters, cfg: LossConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.asarray(batch.embeddings, dtype=np.float64)
    w = np.asarray(centers.weights, dtype=np.float64)
    labels = np.asarray(batch.labels)

    if x.ndim != 2 or x.shape[0] < 1:
        raise ArgumentError(f"Embeddings must be a non-empty N x d matrix, got shape {x.shape}")
    if w.ndim != 2:
        raise ArgumentError(f"Class centers must be a C x d matrix, got shape {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ArgumentError(f"Embedding dimension {x.shape[1]} does not match center dimension {w.shape[1]}")
    if w.shape[0] != cfg.num_classes:
        raise ArgumentError(f"Expected {cfg.num_classes} class centers, got {w.shape[0]}")
    if x.shape[1] != cfg.dim:
        raise ArgumentError(f"Expected embedding dimension {cfg.dim}, got {x.shape[1]}")
    if labels.shape != (x.shape[0],):
        raise ArgumentError(f"Expected {x.shape[0]} labels, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ArgumentError(f"Labels must be integers, got dtype {labels.dtype}")
    if np.any(labels < 0) or np.any(labels >= cfg.num_classes):
        bad = labels[(labels < 0) | (labels >= cfg.num_classes)][0]
        raise ArgumentError(f"Label {bad} out of range [0, {cfg.num_classes})")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
        raise ArgumentError("Embeddings and class centers must be finite")
    return x, w, labels


def _one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    target = np.zeros((len(labels), num_classes))
    target[np.arange(len(labels)), labels] = 1.0
    return target


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient w.r.t. the logits.

    logsumexp subtracts the row max, so large scaled logits do not overflow.
    """
    n = logits.shape[0]
    rows = np.arange(n)
    per_sample = logsumexp(logits, axis=1) - logits[rows, labels]
    grad = softmax(logits, axis=1)
    grad[rows, labels] -= 1.0
    return float(np.mean(per_sample)), grad / n


# Euclidean helpers

def _normalize_rows(v: np.ndarray, name: str) -> Tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(v, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.argmax(norms == 0.0))
        raise DegenerateInputError(f"{name} row {bad} has zero norm and cannot be length-normalized")
    return v / norms[:, None], norms


def _normalize_backward(unit: np.ndarray, norms: np.ndarray, grad_unit: np.ndarray) -> np.ndarray:
    radial = np.sum(unit * grad_unit, axis=1, keepdims=True)
    return (grad_unit - unit * radial) / norms[:, None]


def _cosine_margin_loss(x: np.ndarray, w: np.ndarray, labels: np.ndarray, s: float,
                        target_fn: Optional[Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]]) -> LossOutput:
    """Scaled cosine logits with an optional transform of the target-class cosine.

    ``target_fn`` maps the target cosines to (target logit cosines, derivative).
    """
    x_unit, x_norms = _normalize_rows(x, 'embedding')
    w_unit, w_norms = _normalize_rows(w, 'class center')
    cosine = x_unit @ w_unit.T
    rows = np.arange(len(labels))

    adjusted = cosine.copy()
    slope = np.ones_like(cosine)
    if target_fn is not None:
        phi, dphi = target_fn(cosine[rows, labels])
        adjusted[rows, labels] = phi
        slope[rows, labels] = dphi

    logits = s * adjusted
    value, grad_logits = cross_entropy(logits, labels)

    grad_cosine = s * grad_logits * slope
    grad_x = _normalize_backward(x_unit, x_norms, grad_cosine @ w_unit)
    grad_w = _normalize_backward(w_unit, w_norms, grad_cosine.T @ x_unit)
    return LossOutput(value=value, grad_embeddings=grad_x, grad_weights=grad_w, logits=logits)


# Euclidean losses

def softmax_ce(batch: Batch, centers: ClassCenters, cfg: LossConfig, use_scale: bool = False) -> LossOutput:
    """Softmax cross-entropy over dot-product logits.

    With ``use_scale`` the logits are s times the cosine between the embedding and
    the class center.
    """
    x, w, labels = _check_inputs(batch, centers, cfg)
    if use_scale:
        return _cosine_margin_loss(x, w, labels, cfg.s, None)

    logits = x @ w.T
    value, grad_logits = cross_entropy(logits, labels)
    return LossOutput(value=value, grad_embeddings=grad_logits @ w,
                      grad_weights=grad_logits.T @ x, logits=logits)


def am_softmax(batch: Batch, centers: ClassCenters, cfg: LossConfig) -> LossOutput:
    """Additive cosine margin: target logit s*(cos - m), other logits s*cos."""
    x, w, labels = _check_inputs(batch, centers, cfg)
    margin = cfg.m

    def subtract_margin(cos_target):
        return cos_target - margin, np.ones_like(cos_target)

    return _cosine_margin_loss(x, w, labels, cfg.s, subtract_margin)


def aam_softmax(batch: Batch, centers: ClassCenters, cfg: LossConfig) -> LossOutput:
    """Additive angular margin: target logit s*cos(theta + m) with theta + m capped at pi."""
    x, w, labels = _check_inputs(batch, centers, cfg)
    cos_m = math.cos(cfg.m)
    sin_m = math.sin(cfg.m)
    # theta + m > pi exactly when cos(theta) < cos(pi - m)
    threshold = math.cos(math.pi - cfg.m)

    def add_angle(cos_target):
        cos_target = np.clip(cos_target, -1.0, 1.0)
        sin_target = np.sqrt(np.maximum(0.0, 1.0 - cos_target ** 2))
        phi = cos_target * cos_m - sin_target * sin_m
        safe_sin = np.where(sin_target > 0.0, sin_target, 1.0)
        dphi = np.where(sin_target > 0.0, cos_m + cos_target * sin_m / safe_sin, cos_m)
        capped = cos_target < threshold
        phi = np.where(capped, -1.0, phi)
        dphi = np.where(capped, 0.0, dphi)
        return phi, dphi

    return _cosine_margin_loss(x, w, labels, cfg.s, add_angle)


# Hyperbolic losses

def _hyperbolic_margin_loss(x: np.ndarray, w: np.ndarray, labels: np.ndarray,
                            cfg: LossConfig, margin: float) -> LossOutput:
    c_proj = fitting_curvature(cfg.c, DISTANCE_CURVATURE)
    x_ball = project_rows(x, c_proj, cfg.policy)
    w_ball = project_rows(w, c_proj, cfg.policy)
    dist = pairwise_distance(x_ball, w_ball, DISTANCE_CURVATURE, cfg.policy)
    if margin != 0.0:
        dist = dist + margin * _one_hot(labels, cfg.num_classes)

    logits = -cfg.s * dist
    value, grad_logits = cross_entropy(logits, labels)

    # the margin is additive, so it leaves d logits / d dist unchanged
    grad_dist = -cfg.s * grad_logits
    grad_x_ball, grad_w_ball = pairwise_distance_backward(x_ball, w_ball, grad_dist,
                                                          DISTANCE_CURVATURE, cfg.policy)
    grad_x = project_rows_backward(x, grad_x_ball, c_proj, cfg.policy)
    grad_w = project_rows_backward(w, grad_w_ball, c_proj, cfg.policy)
    return LossOutput(value=value, grad_embeddings=grad_x, grad_weights=grad_w, logits=logits)


def h_softmax(batch: Batch, centers: ClassCenters, cfg: LossConfig) -> LossOutput:
    """Cross-entropy over logits -s * d(proj(x_i), proj(w_j)); ``cfg.m`` is ignored."""
    x, w, labels = _check_inputs(batch, centers, cfg)
    return _hyperbolic_margin_loss(x, w, labels, cfg, 0.0)


def ham_softmax(batch: Batch, centers: ClassCenters, cfg: LossConfig) -> LossOutput:
    """H-Softmax with the margin ``cfg.m`` added to the distance of the target class."""
    x, w, labels = _check_inputs(batch, centers, cfg)
    return _hyperbolic_margin_loss(x, w, labels, cfg, cfg.m)


def joint_eh_loss(batch: Batch, centers_euc: ClassCenters, centers_hyp: ClassCenters,
                  cfg: LossConfig) -> LossOutput:
    """Weighted sum of AM-Softmax (Euclidean head) and HAM-Softmax (hyperbolic head).

    With ``cfg.share_centers`` both heads read ``centers_hyp`` and their center
    gradients are summed into ``grad_weights``. Otherwise the Euclidean head's
    gradient is returned in ``grad_weights_euclidean``.
    """
    weight = cfg.euclidean_weight
    euc = am_softmax(batch, centers_hyp if cfg.share_centers else centers_euc, cfg)
    hyp = ham_softmax(batch, centers_hyp, cfg)

    value = weight * euc.value + (1.0 - weight) * hyp.value
    grad_embeddings = weight * euc.grad_embeddings + (1.0 - weight) * hyp.grad_embeddings
    if cfg.share_centers:
        return LossOutput(value=value, grad_embeddings=grad_embeddings,
                          grad_weights=weight * euc.grad_weights + (1.0 - weight) * hyp.grad_weights,
                          logits=hyp.logits)
    return LossOutput(value=value, grad_embeddings=grad_embeddings,
                      grad_weights=(1.0 - weight) * hyp.grad_weights, logits=hyp.logits,
                      grad_weights_euclidean=weight * euc.grad_weights)


def hyperbolic_posterior(embedding: np.ndarray, centers: ClassCenters, cfg: LossConfig) -> np.ndarray:
    """Class posterior softmax(-s * d) of a single embedding; sums to 1."""
    x = np.asarray(embedding, dtype=np.float64)
    if x.ndim != 1:
        raise ArgumentError(f"Embedding must be a vector, got shape {x.shape}")
    batch = Batch(embeddings=x[None, :], labels=np.zeros(1, dtype=np.int64))
    x, w, _ = _check_inputs(batch, centers, cfg)
    c_proj = fitting_curvature(cfg.c, DISTANCE_CURVATURE)
    dist = pairwise_distance(project_rows(x, c_proj, cfg.policy), project_rows(w, c_proj, cfg.policy),
                             DISTANCE_CURVATURE, cfg.policy)
    return softmax(-cfg.s * dist[0])


LossFn = Callable[..., LossOutput]

LOSSES: Dict[LossKind, LossFn] = {
    LossKind.SOFTMAX: lambda batch, centers, cfg: softmax_ce(batch, centers, cfg, use_scale=False),
    LossKind.SOFTMAX_SCALED: lambda batch, centers, cfg: softmax_ce(batch, centers, cfg, use_scale=True),
    LossKind.AM: am_softmax,
    LossKind.AAM: aam_softmax,
    LossKind.H: h_softmax,
    LossKind.HAM: ham_softmax,
}


def compute_loss(kind: LossKind, batch: Batch, centers: ClassCenters, cfg: LossConfig,
                 centers_euc: Optional[ClassCenters] = None) -> LossOutput:
    """Dispatch to the loss named by ``kind``.

    The joint loss additionally needs the Euclidean head's centers unless
    ``cfg.share_centers`` is set.
    """
    kind = LossKind(kind)
    if kind == LossKind.JOINT_EH:
        if centers_euc is None and not cfg.share_centers:
            raise ArgumentError("joint_eh needs Euclidean class centers unless share_centers is set")
        return joint_eh_loss(batch, centers_euc if centers_euc is not None else centers, centers, cfg)
    return LOSSES[kind](batch, centers, cfg)
