"""Reading and writing trial lists and score files.

Trial list: one trial per line, ``<label 0|1> <enroll_id> <test_id>``.
Score file: one score per line, ``<enroll_id> <test_id> <score>``.
Both are whitespace-separated UTF-8 text; blank lines are skipped.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np

from .errors import FormatError, MissingScoreError
from .models import TrialScores

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Trial:
    """One verification trial from a trial list."""
    is_target: bool
    enroll_id: str
    test_id: str


def _fields(path: str, expected: int) -> Iterator[Tuple[int, List[str]]]:
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != expected:
                raise FormatError(f"expected {expected} fields, found {len(parts)}", path, line_number)
            yield line_number, parts


def read_trials(path: str) -> List[Trial]:
    """Parse a trial list file."""
    trials = []
    for line_number, (label, enroll_id, test_id) in _fields(path, 3):
        if label not in ('0', '1'):
            raise FormatError(f"trial label must be 0 or 1, found '{label}'", path, line_number)
        trials.append(Trial(is_target=label == '1', enroll_id=enroll_id, test_id=test_id))
    if not trials:
        raise FormatError("trial list is empty", path)
    logger.debug(f"Read {len(trials)} trials from {path}")
    return trials


def read_scores(path: str) -> Dict[Tuple[str, str], float]:
    """Parse a score file into a mapping (enroll_id, test_id) -> score."""
    scores = {}
    for line_number, (enroll_id, test_id, value) in _fields(path, 3):
        try:
            score = float(value)
        except ValueError:
            raise FormatError(f"score is not a number: '{value}'", path, line_number)
        if not math.isfinite(score):
            raise FormatError(f"score must be finite, found '{value}'", path, line_number)
        scores[(enroll_id, test_id)] = score
    logger.debug(f"Read {len(scores)} scores from {path}")
    return scores


def join_scores(trials: Sequence[Trial], scores: Dict[Tuple[str, str], float]) -> TrialScores:
    """Split scores into target and non-target lists following the trial labels.

    Raises:
        MissingScoreError: If a trial has no score
    """
    targets = []
    nontargets = []
    for trial in trials:
        pair = (trial.enroll_id, trial.test_id)
        if pair not in scores:
            raise MissingScoreError(pair)
        (targets if trial.is_target else nontargets).append(scores[pair])
    return TrialScores(target_scores=np.array(targets), nontarget_scores=np.array(nontargets))


def write_trials(path: str, trials: Sequence[Trial]):
    """Write a trial list file."""
    with open(path, 'w', encoding='utf-8') as f:
        for trial in trials:
            f.write(f"{int(trial.is_target)} {trial.enroll_id} {trial.test_id}\n")


def write_scores(path: str, trials: Sequence[Trial], scores: Sequence[float]):
    """Write one score line per trial, 17 significant digits."""
    with open(path, 'w', encoding='utf-8') as f:
        for trial, score in zip(trials, scores):
            f.write(f"{trial.enroll_id} {trial.test_id} {float(score):.17g}\n")
