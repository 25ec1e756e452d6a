"""Data models for hyp-softmax."""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import Config
from .errors import ArgumentError


class LossKind(str, Enum):
    """Loss functions available to the trainer."""
    SOFTMAX = 'softmax'
    SOFTMAX_SCALED = 'softmax_scaled'
    AM = 'am'
    AAM = 'aam'
    H = 'h'
    HAM = 'ham'
    JOINT_EH = 'joint_eh'

    @property
    def is_hyperbolic(self) -> bool:
        return self in (LossKind.H, LossKind.HAM, LossKind.JOINT_EH)


class ScoringBackend(str, Enum):
    """Similarity used to score verification trials."""
    COSINE = 'cosine'
    HYPERBOLIC = 'hyperbolic'


@dataclass(frozen=True)
class StabilityPolicy:
    """Clipping constants that keep ball arithmetic finite."""
    eps_boundary: float = Config.EPS_BOUNDARY
    delta_norm: float = Config.DELTA_NORM
    arcosh_floor: float = Config.ARCOSH_FLOOR

    def __post_init__(self):
        if not 0.0 < self.eps_boundary < 1.0:
            raise ArgumentError(f"eps_boundary must be in (0, 1), got {self.eps_boundary}")
        if not self.delta_norm > 0.0:
            raise ArgumentError(f"delta_norm must be positive, got {self.delta_norm}")
        if not self.arcosh_floor >= 0.0:
            raise ArgumentError(f"arcosh_floor must be nonnegative, got {self.arcosh_floor}")


@dataclass(frozen=True)
class Curvature:
    """Strength c > 0 of the negative curvature -c."""
    c: float

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0.0):
            raise ArgumentError(f"Curvature must be a finite positive number, got {self.c}")

    @property
    def radius(self) -> float:
        return 1.0 / math.sqrt(self.c)


@dataclass(eq=False)
class BallPoint:
    """A point of the open Poincare ball of curvature c."""
    coords: np.ndarray
    c: float


@dataclass(frozen=True)
class LossConfig:
    """Hyperparameters shared by every loss."""
    num_classes: int
    dim: int
    c: float = Config.CURVATURE_HAM_SOFTMAX
    s: float = Config.SCALE
    m: float = Config.MARGIN
    euclidean_weight: float = Config.EUCLIDEAN_WEIGHT
    share_centers: bool = False
    policy: StabilityPolicy = field(default_factory=StabilityPolicy)

    def __post_init__(self):
        Curvature(self.c)
        if not self.s > 0.0:
            raise ArgumentError(f"Scale s must be positive, got {self.s}")
        if not self.m >= 0.0:
            raise ArgumentError(f"Margin m must be nonnegative, got {self.m}")
        if self.num_classes < 1:
            raise ArgumentError(f"num_classes must be at least 1, got {self.num_classes}")
        if self.dim < 1:
            raise ArgumentError(f"dim must be at least 1, got {self.dim}")
        if not 0.0 <= self.euclidean_weight <= 1.0:
            raise ArgumentError(f"euclidean_weight must be in [0, 1], got {self.euclidean_weight}")


@dataclass(eq=False)
class ClassCenters:
    """C x d matrix of raw class-center parameters, one row per class."""
    weights: np.ndarray


@dataclass(eq=False)
class Batch:
    """N x d embeddings with their integer class labels."""
    embeddings: np.ndarray
    labels: np.ndarray


@dataclass(eq=False)
class LossOutput:
    """Mean batch loss, its gradients and the pre-softmax logits."""
    value: float
    grad_embeddings: np.ndarray
    grad_weights: np.ndarray
    logits: np.ndarray
    # Joint loss only: gradient of the Euclidean head when centers are not shared
    grad_weights_euclidean: Optional[np.ndarray] = None


@dataclass(eq=False)
class TrialScores:
    """Similarity scores of target and non-target trials."""
    target_scores: np.ndarray
    nontarget_scores: np.ndarray


@dataclass(frozen=True)
class DcfParams:
    """Detection cost parameters."""
    p_target: float = Config.P_TARGET
    c_miss: float = Config.C_MISS
    c_fa: float = Config.C_FA

    def __post_init__(self):
        if not 0.0 < self.p_target < 1.0:
            raise ArgumentError(f"p_target must be in (0, 1), got {self.p_target}")
        if not (self.c_miss > 0.0 and self.c_fa > 0.0):
            raise ArgumentError("Detection costs must be positive")


@dataclass(frozen=True)
class TreeSpec:
    """Shape of a synthetic class-prototype tree."""
    depth: int = Config.TREE_DEPTH
    branching: int = Config.TREE_BRANCHING
    dim: int = Config.TREE_DIM
    level_scales: Tuple[float, ...] = Config.TREE_LEVEL_SCALES
    noise_sigma: float = Config.TREE_NOISE_SIGMA
    samples_per_class: int = Config.TREE_SAMPLES_PER_CLASS
    seed: int = 0

    @property
    def num_classes(self) -> int:
        return self.branching ** self.depth


@dataclass(eq=False)
class LabeledDataset:
    """Labeled vectors plus the ancestor path of every class."""
    vectors: np.ndarray
    labels: np.ndarray
    class_tree: Dict[int, Tuple[int, ...]]
    prototypes: Optional[np.ndarray] = None

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


@dataclass(eq=False)
class TrialSet:
    """Held-out vectors and the (enroll, test) index pairs scored against each other."""
    vectors: np.ndarray
    labels: np.ndarray
    pairs: np.ndarray
    is_target: np.ndarray

    def __len__(self) -> int:
        return int(len(self.pairs))


@dataclass(frozen=True)
class EmbedderSpec:
    """Two-layer feed-forward embedder shape."""
    input_dim: int = Config.INPUT_DIM
    hidden_dim: int = Config.HIDDEN_DIM
    output_dim: int = Config.OUTPUT_DIM
    activation: str = 'relu'
    seed: int = 0

    def __post_init__(self):
        if min(self.input_dim, self.hidden_dim, self.output_dim) < 1:
            raise ArgumentError("Embedder dimensions must be positive")
        if self.activation not in ('relu', 'tanh'):
            raise ArgumentError(f"Unknown activation '{self.activation}'. Must be one of: relu, tanh")


@dataclass(frozen=True)
class OptimSpec:
    """Adam hyperparameters and the per-epoch learning-rate schedule."""
    lr0: float = Config.LEARNING_RATE
    decay: float = Config.LR_DECAY
    beta1: float = Config.ADAM_BETA1
    beta2: float = Config.ADAM_BETA2
    eps_opt: float = Config.ADAM_EPS
    epochs: int = Config.EPOCHS
    batch_size: int = Config.BATCH_SIZE
    seed: int = 0

    def __post_init__(self):
        if self.lr0 < 0.0:
            raise ArgumentError(f"lr0 must be nonnegative, got {self.lr0}")
        if not 0.0 < self.decay <= 1.0:
            raise ArgumentError(f"decay must be in (0, 1], got {self.decay}")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ArgumentError("Adam betas must be in (0, 1)")
        if not self.eps_opt > 0.0:
            raise ArgumentError(f"eps_opt must be positive, got {self.eps_opt}")
        if self.epochs < 0:
            raise ArgumentError(f"epochs must be nonnegative, got {self.epochs}")
        if self.batch_size < 1:
            raise ArgumentError(f"batch_size must be positive, got {self.batch_size}")

    def learning_rate(self, epoch: int) -> float:
        return self.lr0 * self.decay ** epoch


@dataclass
class EpochRecord:
    """One training epoch."""
    epoch: int
    loss: float
    lr: float
    wall_time_s: float
    eer: float
    min_dcf: float


@dataclass
class TrainReport:
    """Per-epoch loss trace and held-out verification results."""
    loss_kind: LossKind
    scoring: ScoringBackend
    initial_loss: float
    initial_eer: float
    initial_min_dcf: float
    records: List[EpochRecord] = field(default_factory=list)
    hierarchy_rho: Optional[float] = None

    @property
    def final_eer(self) -> float:
        return self.records[-1].eer if self.records else self.initial_eer

    @property
    def final_min_dcf(self) -> float:
        return self.records[-1].min_dcf if self.records else self.initial_min_dcf

    @property
    def final_loss(self) -> float:
        return self.records[-1].loss if self.records else self.initial_loss
