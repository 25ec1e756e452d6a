"""Synthetic hierarchical datasets, embedding files and held-out trial splits.

Random numbers come from numpy's ``Generator(PCG64(seed))``, whose bit stream is
fixed across platforms, so a seed pins down a dataset exactly.
"""
import logging
from typing import Dict, List, Tuple

import numpy as np

from .config import Config
from .errors import ArgumentError, FormatError
from .models import LabeledDataset, TreeSpec, TrialSet

logger = logging.getLogger(__name__)


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator used for every random draw in the package."""
    return np.random.Generator(np.random.PCG64(seed))


def default_level_scales(depth: int) -> Tuple[float, ...]:
    """Offset scales 1, r, r^2, ... for a tree of the given depth."""
    return tuple(Config.TREE_LEVEL_RATIO ** level for level in range(depth))


def validate_tree_spec(spec: TreeSpec):
    """Check a TreeSpec; raises ArgumentError on invalid fields."""
    if spec.depth < 1 or spec.branching < 1 or spec.dim < 1 or spec.samples_per_class < 1:
        raise ArgumentError("depth, branching, dim and samples_per_class must be positive")
    if spec.branching ** spec.depth > Config.MAX_CLASSES:
        raise ArgumentError(f"branching^depth = {spec.branching}^{spec.depth} exceeds {Config.MAX_CLASSES} classes")
    if len(spec.level_scales) != spec.depth:
        raise ArgumentError(f"Expected {spec.depth} level scales, got {len(spec.level_scales)}")
    if any(scale <= 0.0 for scale in spec.level_scales):
        raise ArgumentError(f"Level scales must be positive, got {spec.level_scales}")
    if spec.noise_sigma < 0.0:
        raise ArgumentError(f"noise_sigma must be nonnegative, got {spec.noise_sigma}")
    if not 0 <= spec.seed < 2 ** 64:
        raise ArgumentError(f"seed must be an unsigned 64-bit integer, got {spec.seed}")
    if any(later >= earlier for earlier, later in zip(spec.level_scales, spec.level_scales[1:])):
        logger.warning(f"Level scales {spec.level_scales} are not strictly decreasing; "
                       "deeper levels will not nest inside their parents")


def generate(spec: TreeSpec) -> LabeledDataset:
    """Sample a labeled dataset from a random prototype tree.

    The root prototype sits at the origin. Each child is its parent plus
    ``level_scales[level]`` times a random unit direction. Leaves are the classes;
    every sample is its leaf prototype plus isotropic gaussian noise.
    """
    validate_tree_spec(spec)
    rng = make_rng(spec.seed)

    prototypes = np.zeros((1, spec.dim))
    paths: List[Tuple[int, ...]] = [()]
    for level, scale in enumerate(spec.level_scales):
        children = []
        child_paths = []
        for parent, path in zip(prototypes, paths):
            for branch in range(spec.branching):
                direction = rng.standard_normal(spec.dim)
                direction /= np.linalg.norm(direction)
                children.append(parent + scale * direction)
                child_paths.append(path + (branch,))
        prototypes = np.array(children)
        paths = child_paths
        logger.debug(f"Tree level {level + 1}: {len(paths)} prototypes")

    num_classes = len(paths)
    vectors = np.empty((num_classes * spec.samples_per_class, spec.dim))
    for label, prototype in enumerate(prototypes):
        noise = rng.standard_normal((spec.samples_per_class, spec.dim))
        start = label * spec.samples_per_class
        vectors[start:start + spec.samples_per_class] = prototype + spec.noise_sigma * noise
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), spec.samples_per_class)

    logger.info(f"Generated {len(vectors)} vectors in {num_classes} classes (dim {spec.dim}, seed {spec.seed})")
    return LabeledDataset(vectors=vectors, labels=labels,
                          class_tree={label: path for label, path in enumerate(paths)},
                          prototypes=prototypes)


def save_embeddings(ds: LabeledDataset, path: str):
    """Write ``<label> <v1> ... <vd>`` lines with 17 significant digits."""
    with open(path, 'w', encoding='utf-8') as f:
        for label, vector in zip(ds.labels, ds.vectors):
            f.write(f"{int(label)} " + " ".join(f"{value:.17g}" for value in vector) + "\n")
    logger.info(f"Saved {len(ds.labels)} labeled vectors to {path}")


def load_embeddings(path: str) -> LabeledDataset:
    """Read a labeled embedding file.

    Classes read from a file have no known hierarchy; each label maps to the
    one-step path ``(label,)``.

    Raises:
        FormatError: On ragged rows, non-numeric fields or an empty file
    """
    labels = []
    rows = []
    dim = None
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise FormatError("expected a label followed by at least one coordinate", path, line_number)
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise FormatError(f"expected {dim} coordinates, found {len(parts) - 1}", path, line_number)
            try:
                label = int(parts[0])
                values = [float(value) for value in parts[1:]]
            except ValueError:
                raise FormatError("non-numeric field", path, line_number)
            if label < 0:
                raise FormatError(f"labels must be nonnegative, found {label}", path, line_number)
            if not np.all(np.isfinite(values)):
                raise FormatError("coordinates must be finite", path, line_number)
            labels.append(label)
            rows.append(values)

    if not rows:
        raise FormatError("no embeddings found", path)

    labels = np.array(labels, dtype=np.int64)
    logger.info(f"Loaded {len(rows)} vectors of dimension {dim} from {path}")
    return LabeledDataset(vectors=np.array(rows, dtype=np.float64), labels=labels,
                          class_tree={int(label): (int(label),) for label in np.unique(labels)})


def split(ds: LabeledDataset, train_frac: float, seed: int,
          trials_per_class: int = Config.TRIALS_PER_CLASS) -> Tuple[LabeledDataset, TrialSet]:
    """Stratified train/held-out split with verification trials on the held-out part.

    Each class keeps round(train_frac * n) samples for training. From its held-out
    samples a class contributes ``trials_per_class`` target pairs (two distinct
    samples of the class) and as many non-target pairs (one of its samples against
    a sample of another class).
    """
    if not 0.0 < train_frac < 1.0:
        raise ArgumentError(f"train_frac must be in (0, 1), got {train_frac}")
    if trials_per_class < 1:
        raise ArgumentError(f"trials_per_class must be positive, got {trials_per_class}")
    rng = make_rng(seed)

    train_idx = []
    held_idx = []
    for label in np.unique(ds.labels):
        members = rng.permutation(np.flatnonzero(ds.labels == label))
        n_train = int(round(train_frac * len(members)))
        train_idx.append(members[:n_train])
        held_idx.append(np.sort(members[n_train:]))
    train_idx = np.sort(np.concatenate(train_idx))
    held = np.concatenate(held_idx)

    held_labels = ds.labels[held]
    positions: Dict[int, np.ndarray] = {
        int(label): np.flatnonzero(held_labels == label) for label in np.unique(held_labels)
    }
    classes = sorted(positions)

    pairs = []
    is_target = []
    for label in classes:
        own = positions[label]
        if len(own) >= 2:
            for _ in range(trials_per_class):
                enroll, test = rng.choice(own, size=2, replace=False)
                pairs.append((enroll, test))
                is_target.append(True)
        else:
            logger.warning(f"Class {label} has {len(own)} held-out samples and contributes no target trials")

        others = [other for other in classes if other != label]
        if not others:
            continue
        for _ in range(trials_per_class):
            enroll = rng.choice(own)
            other = others[int(rng.integers(len(others)))]
            pairs.append((enroll, rng.choice(positions[other])))
            is_target.append(False)

    train = LabeledDataset(vectors=ds.vectors[train_idx], labels=ds.labels[train_idx],
                           class_tree=dict(ds.class_tree), prototypes=ds.prototypes)
    trials = TrialSet(vectors=ds.vectors[held], labels=held_labels,
                      pairs=np.array(pairs, dtype=np.int64).reshape(-1, 2),
                      is_target=np.array(is_target, dtype=bool))
    logger.info(f"Split {len(ds.labels)} samples into {len(train_idx)} train / {len(held)} held-out, "
                f"{int(trials.is_target.sum())} target and {int((~trials.is_target).sum())} non-target trials")
    return train, trials
