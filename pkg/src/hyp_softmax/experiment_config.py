"""Experiment description files.

An experiment file holds one ``key = value`` per line with ``#`` comments, the
same syntax as a ``.env`` file, and is parsed with python-dotenv. Lists are
comma-separated. Every run writes the resolved config back as a manifest that
reparses to an equal ``ExperimentConfig``.
"""
import logging
import math
import os
from dataclasses import dataclass, fields, replace
from typing import Any, Callable, Dict, Iterable, Optional, Tuple

from dotenv import dotenv_values

from .config import Config
from .errors import ArgumentError, ConfigError
from .losses import default_curvature
from .models import EmbedderSpec, LossConfig, LossKind, OptimSpec, ScoringBackend, TreeSpec
from .synthdata import default_level_scales, validate_tree_spec

logger = logging.getLogger(__name__)

SWEEP_PARAMS = ('c', 's', 'm', 'euclidean_weight')
TREE_KEYS = ('tree_depth', 'tree_branching', 'tree_dim', 'tree_level_scales',
             'tree_noise_sigma', 'tree_samples_per_class')


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment, including its sweep axis."""
    # data
    dataset: Optional[str] = None
    tree_depth: int = Config.TREE_DEPTH
    tree_branching: int = Config.TREE_BRANCHING
    tree_dim: int = Config.TREE_DIM
    tree_level_scales: Optional[Tuple[float, ...]] = None
    tree_noise_sigma: float = Config.TREE_NOISE_SIGMA
    tree_samples_per_class: int = Config.TREE_SAMPLES_PER_CLASS
    # loss
    loss: LossKind = LossKind.HAM
    c: Optional[float] = None
    s: float = Config.SCALE
    m: float = Config.MARGIN
    euclidean_weight: float = Config.EUCLIDEAN_WEIGHT
    share_centers: bool = False
    # embedder
    hidden_dim: int = Config.HIDDEN_DIM
    output_dim: int = Config.OUTPUT_DIM
    activation: str = 'relu'
    # optimizer
    lr0: float = Config.LEARNING_RATE
    decay: float = Config.LR_DECAY
    beta1: float = Config.ADAM_BETA1
    beta2: float = Config.ADAM_BETA2
    eps_opt: float = Config.ADAM_EPS
    epochs: int = Config.EPOCHS
    batch_size: int = Config.BATCH_SIZE
    # evaluation
    scoring: Optional[ScoringBackend] = None
    train_frac: float = Config.TRAIN_FRAC
    trials_per_class: int = Config.TRIALS_PER_CLASS
    p_target: float = Config.P_TARGET
    # run
    seed: int = 0
    sweep_param: Optional[str] = None
    sweep_values: Tuple[float, ...] = ()
    output_dir: str = 'results'
    workers: int = 1

    @property
    def curvature(self) -> float:
        return self.c if self.c is not None else default_curvature(self.loss)

    @property
    def sweep_points(self) -> Tuple[Tuple[Optional[str], Optional[float]], ...]:
        """(param, value) per sweep point; a single (None, None) when nothing is swept."""
        if self.sweep_param is None:
            return ((None, None),)
        return tuple((self.sweep_param, value) for value in self.sweep_values)

    # Seeds of the independent random streams, all derived from ``seed``
    def tree_spec(self) -> TreeSpec:
        return TreeSpec(depth=self.tree_depth, branching=self.tree_branching, dim=self.tree_dim,
                        level_scales=self.tree_level_scales or default_level_scales(self.tree_depth),
                        noise_sigma=self.tree_noise_sigma,
                        samples_per_class=self.tree_samples_per_class, seed=self.seed)

    def embedder_spec(self, input_dim: int) -> EmbedderSpec:
        return EmbedderSpec(input_dim=input_dim, hidden_dim=self.hidden_dim, output_dim=self.output_dim,
                            activation=self.activation, seed=self.seed + 1)

    def optim_spec(self) -> OptimSpec:
        return OptimSpec(lr0=self.lr0, decay=self.decay, beta1=self.beta1, beta2=self.beta2,
                         eps_opt=self.eps_opt, epochs=self.epochs, batch_size=self.batch_size,
                         seed=self.seed + 2)

    @property
    def split_seed(self) -> int:
        return self.seed + 3

    def loss_config(self, num_classes: int) -> LossConfig:
        return LossConfig(num_classes=num_classes, dim=self.output_dim, c=self.curvature, s=self.s,
                          m=self.m, euclidean_weight=self.euclidean_weight, share_centers=self.share_centers)

    def at_point(self, param: Optional[str], value: Optional[float]) -> 'ExperimentConfig':
        """The single-point config for one sweep value."""
        if param is None:
            return self
        return replace(self, **{param: value})


# Parsers

def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ('true', '1', 'yes'):
        return True
    if lowered in ('false', '0', 'no'):
        return False
    raise ValueError(f"expected true or false, got '{text}'")


def _parse_float_list(text: str) -> Tuple[float, ...]:
    return tuple(float(item) for item in text.split(',') if item.strip())


def _optional(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    return lambda text: None if text.strip().lower() in ('', 'none') else parse(text)


PARSERS: Dict[str, Callable[[str], Any]] = {
    'dataset': _optional(str),
    'tree_depth': int,
    'tree_branching': int,
    'tree_dim': int,
    'tree_level_scales': _optional(_parse_float_list),
    'tree_noise_sigma': float,
    'tree_samples_per_class': int,
    'loss': LossKind,
    'c': _optional(float),
    's': float,
    'm': float,
    'euclidean_weight': float,
    'share_centers': _parse_bool,
    'hidden_dim': int,
    'output_dim': int,
    'activation': str,
    'lr0': float,
    'decay': float,
    'beta1': float,
    'beta2': float,
    'eps_opt': float,
    'epochs': int,
    'batch_size': int,
    'scoring': _optional(ScoringBackend),
    'train_frac': float,
    'trials_per_class': int,
    'p_target': float,
    'seed': int,
    'sweep_param': _optional(str),
    'sweep_values': _parse_float_list,
    'output_dir': str,
    'workers': int,
}


def _check(cfg: ExperimentConfig, explicit: Iterable[str]):
    """Cross-field validation; raises ConfigError naming the first bad field."""
    explicit = set(explicit)
    if cfg.dataset is not None:
        if not os.path.isfile(cfg.dataset):
            raise ConfigError('dataset', f"file not found: {cfg.dataset}")
        conflicting = sorted(explicit.intersection(TREE_KEYS))
        if conflicting:
            raise ConfigError(conflicting[0], "cannot be combined with dataset")
    if cfg.sweep_param is not None:
        if cfg.sweep_param not in SWEEP_PARAMS:
            raise ConfigError('sweep_param', f"must be one of {', '.join(SWEEP_PARAMS)}, got '{cfg.sweep_param}'")
        if not cfg.sweep_values:
            raise ConfigError('sweep_values', "must list at least one value when sweep_param is set")
    elif cfg.sweep_values:
        raise ConfigError('sweep_param', "sweep_values given without sweep_param")
    if not 0.0 < cfg.p_target < 1.0:
        raise ConfigError('p_target', f"must be in (0, 1), got {cfg.p_target}")
    if not 0.0 < cfg.train_frac < 1.0:
        raise ConfigError('train_frac', f"must be in (0, 1), got {cfg.train_frac}")
    if cfg.trials_per_class < 1:
        raise ConfigError('trials_per_class', f"must be positive, got {cfg.trials_per_class}")
    if cfg.workers < 1:
        raise ConfigError('workers', f"must be positive, got {cfg.workers}")
    if not cfg.output_dir:
        raise ConfigError('output_dir', "must not be empty")

    for key, (accepts, expected) in RANGES.items():
        value = getattr(cfg, key)
        if value is not None and not accepts(value):
            raise ConfigError(key, f"must be {expected}, got {value}")
    if cfg.tree_level_scales is not None and len(cfg.tree_level_scales) != cfg.tree_depth:
        raise ConfigError('tree_level_scales', f"expected {cfg.tree_depth} values, got {len(cfg.tree_level_scales)}")
    for value in cfg.sweep_values:
        accepts, expected = RANGES[cfg.sweep_param]
        if not accepts(value):
            raise ConfigError('sweep_values', f"{cfg.sweep_param} must be {expected}, got {value}")

    if cfg.dataset is None:
        try:
            validate_tree_spec(cfg.tree_spec())
        except ArgumentError as e:
            raise ConfigError('tree_depth', str(e)) from e


def _positive(value) -> bool:
    return value > 0


RANGES: Dict[str, Tuple[Callable[[Any], bool], str]] = {
    'tree_depth': (_positive, "positive"),
    'tree_branching': (_positive, "positive"),
    'tree_dim': (_positive, "positive"),
    'tree_level_scales': (lambda scales: all(scale > 0 for scale in scales), "a list of positive scales"),
    'tree_noise_sigma': (lambda v: v >= 0, "nonnegative"),
    'tree_samples_per_class': (_positive, "positive"),
    'c': (lambda v: math.isfinite(v) and v > 0, "a finite positive number"),
    's': (_positive, "positive"),
    'm': (lambda v: v >= 0, "nonnegative"),
    'euclidean_weight': (lambda v: 0 <= v <= 1, "in [0, 1]"),
    'hidden_dim': (_positive, "positive"),
    'output_dim': (_positive, "positive"),
    'activation': (lambda v: v in ('relu', 'tanh'), "relu or tanh"),
    'lr0': (lambda v: v >= 0, "nonnegative"),
    'decay': (lambda v: 0 < v <= 1, "in (0, 1]"),
    'beta1': (lambda v: 0 < v < 1, "in (0, 1)"),
    'beta2': (lambda v: 0 < v < 1, "in (0, 1)"),
    'eps_opt': (_positive, "positive"),
    'epochs': (lambda v: v >= 0, "nonnegative"),
    'batch_size': (_positive, "positive"),
    # tree, embedder, optimizer and split streams use seed .. seed + 3
    'seed': (lambda v: 0 <= v and v + 3 < 2 ** 64, "a nonnegative integer below 2^64 - 3"),
}


def load_experiment_config(path: str) -> ExperimentConfig:
    """Parse and validate an experiment file.

    Raises:
        ConfigError: On unknown keys, unparseable or out-of-range values, or missing files
        OSError: If ``path`` cannot be read
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"Experiment config not found: {path}")
    raw = dotenv_values(path)
    values: Dict[str, Any] = {}
    for key, text in raw.items():
        if key not in PARSERS:
            raise ConfigError(key, "unknown key")
        if text is None:
            raise ConfigError(key, "missing value")
        try:
            values[key] = PARSERS[key](text)
        except ValueError as e:
            raise ConfigError(key, f"invalid value '{text}': {e}") from e

    if values.get('dataset') is not None:
        values['dataset'] = os.path.abspath(values['dataset'])
    cfg = ExperimentConfig(**values)
    _check(cfg, values)
    logger.debug(f"Loaded experiment config from {path}: {cfg}")
    return cfg


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (LossKind, ScoringBackend)):
        return value.value
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ','.join(_format_value(item) for item in value)
    return str(value)


def write_key_values(path: str, items: Dict[str, Any], header: Optional[str] = None):
    """Write ``key = value`` lines, skipping None values."""
    with open(path, 'w', encoding='utf-8') as f:
        if header:
            for line in header.splitlines():
                f.write(f"# {line}\n")
        for key, value in items.items():
            if value is None:
                continue
            f.write(f"{key} = {_format_value(value)}\n")


def write_manifest(cfg: ExperimentConfig, path: str):
    """Write the resolved config; tree keys are left out when a dataset file is used."""
    items = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    if cfg.dataset is not None:
        for key in TREE_KEYS:
            items.pop(key)
    if not cfg.sweep_values:
        items.pop('sweep_values')
    write_key_values(path, items, header="Resolved experiment configuration")
    logger.debug(f"Wrote manifest {path}")
