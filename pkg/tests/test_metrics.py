"""Unit tests for verification metrics and scoring backends."""
import math
from fractions import Fraction

import numpy as np
import pytest

from src.hyp_softmax.errors import ArgumentError, DegenerateInputError
from src.hyp_softmax.metrics import (compute_eer, compute_min_dcf, detection_cost, hierarchy_correlation,
                                     score_cosine, score_hyperbolic, score_rows, tree_distance)
from src.hyp_softmax.models import DcfParams, LossConfig, ScoringBackend, TreeSpec, TrialScores
from src.hyp_softmax.synthdata import generate


def brute_force(targets, nontargets, params):
    """Exact EER and minDCF by trying every distinct score as an accept-if->= threshold."""
    n_t = len(targets)
    n_n = len(nontargets)
    candidates = sorted(set(targets) | set(nontargets)) + [math.inf]
    best_gap = best_total = None
    best_eer = None
    min_cost = None
    p = Fraction(params.p_target)
    norm = min(Fraction(params.c_miss) * p, Fraction(params.c_fa) * (1 - p))
    for threshold in candidates:
        frr = Fraction(sum(score < threshold for score in targets), n_t)
        far = Fraction(sum(score >= threshold for score in nontargets), n_n)
        gap = abs(frr - far)
        total = frr + far
        if best_gap is None or gap < best_gap or (gap == best_gap and total < best_total):
            best_gap, best_total, best_eer = gap, total, total / 2
        cost = (Fraction(params.c_miss) * frr * p + Fraction(params.c_fa) * far * (1 - p)) / norm
        min_cost = cost if min_cost is None else min(min_cost, cost)
    return best_eer, min_cost


class TestEER:
    """Equal error rate."""

    def test_separated(self):
        """Perfectly separated scores have EER 0."""
        eer, _ = compute_eer(TrialScores([0.9, 0.8], [0.1, 0.2]))
        assert eer == 0.0

    def test_three_by_three_fixture(self):
        """The classic 3-target/3-nontarget fixture has EER 1/3 at threshold 0.5."""
        eer, threshold = compute_eer(TrialScores([0.9, 0.8, 0.3], [0.7, 0.2, 0.1]))
        assert eer == pytest.approx(1.0 / 3.0, abs=1e-15)
        assert threshold == pytest.approx(0.5)

    def test_same_distribution(self):
        """Targets and non-targets from one distribution give EER near 0.5."""
        rng = np.random.default_rng(0)
        eer, _ = compute_eer(TrialScores(rng.standard_normal(4000), rng.standard_normal(4000)))
        assert abs(eer - 0.5) < 0.05

    def test_monotone_transform_invariance(self):
        """A strictly increasing transform of all scores changes neither metric."""
        rng = np.random.default_rng(1)
        targets = rng.normal(1.0, 1.0, 50)
        nontargets = rng.normal(0.0, 1.0, 70)
        transformed = TrialScores(np.exp(0.5 * targets) + 3.0, np.exp(0.5 * nontargets) + 3.0)
        original = TrialScores(targets, nontargets)
        assert compute_eer(transformed)[0] == compute_eer(original)[0]
        assert compute_min_dcf(transformed)[0] == compute_min_dcf(original)[0]

    def test_swap_symmetry(self):
        """Negating scores and swapping the roles of the lists leaves EER unchanged."""
        rng = np.random.default_rng(2)
        for _ in range(20):
            targets = rng.integers(0, 5, size=int(rng.integers(1, 8))).astype(float)
            nontargets = rng.integers(0, 5, size=int(rng.integers(1, 8))).astype(float)
            forward, _ = compute_eer(TrialScores(targets, nontargets))
            swapped, _ = compute_eer(TrialScores(-nontargets, -targets))
            assert forward == pytest.approx(swapped, abs=1e-15)

    def test_empty_lists(self):
        """Both lists must be non-empty."""
        with pytest.raises(ArgumentError):
            compute_eer(TrialScores([], [0.1]))
        with pytest.raises(ArgumentError):
            compute_min_dcf(TrialScores([0.1], []))


class TestMinDCF:
    """Minimum normalized detection cost."""

    def test_extremes(self):
        """Separable scores cost 0; identical scores cost 1 with unit costs."""
        assert compute_min_dcf(TrialScores([0.9, 0.8], [0.1, 0.2]))[0] == 0.0
        assert compute_min_dcf(TrialScores([0.5, 0.5], [0.5, 0.5, 0.5]))[0] == pytest.approx(1.0)

    def test_prior_changes_cost(self):
        """The same scores cost differently under different target priors."""
        scores = TrialScores([0.9, 0.8, 0.6, 0.3], [0.7, 0.2, 0.1])
        rare, _ = compute_min_dcf(scores, DcfParams(p_target=0.05))
        even, _ = compute_min_dcf(scores, DcfParams(p_target=0.5))
        assert rare == pytest.approx(0.5)
        assert even == pytest.approx(1.0 / 3.0)

    def test_bounded_by_cost_at_eer_threshold(self):
        """minDCF never exceeds the normalized cost at the EER operating point."""
        rng = np.random.default_rng(4)
        targets = rng.normal(1.0, 1.0, 40)
        nontargets = rng.normal(0.0, 1.0, 60)
        params = DcfParams()
        _, threshold = compute_eer(TrialScores(targets, nontargets))
        p_miss = np.mean(targets < threshold)
        p_fa = np.mean(nontargets >= threshold)
        min_dcf, _ = compute_min_dcf(TrialScores(targets, nontargets), params)
        assert min_dcf <= detection_cost(p_miss, p_fa, params) + 1e-12

    def test_invalid_params(self):
        """p_target must be a probability strictly inside (0, 1)."""
        with pytest.raises(ArgumentError):
            DcfParams(p_target=1.0)


class TestBruteForceOracle:
    """Sweep results against exact rational arithmetic."""

    @pytest.mark.parametrize('p_target', [0.05, 0.5])
    def test_random_score_sets(self, p_target):
        """100 random tied and untied score sets match the exhaustive sweep."""
        rng = np.random.default_rng(99)
        params = DcfParams(p_target=p_target, c_miss=1.0, c_fa=1.0)
        for trial in range(100):
            levels = 4 if trial % 2 else 1000
            targets = [float(v) for v in rng.integers(0, levels, size=int(rng.integers(1, 12)))]
            nontargets = [float(v) for v in rng.integers(0, levels, size=int(rng.integers(1, 12)))]
            expected_eer, expected_dcf = brute_force(targets, nontargets, params)
            scores = TrialScores(np.array(targets), np.array(nontargets))
            assert compute_eer(scores)[0] == pytest.approx(float(expected_eer), abs=1e-12)
            assert compute_min_dcf(scores, params)[0] == pytest.approx(float(expected_dcf), abs=1e-12)

    def test_fixture_min_dcf(self):
        """The 3x3 fixture at p_target 0.05 matches the exact sweep."""
        params = DcfParams(p_target=0.05)
        _, expected = brute_force([0.9, 0.8, 0.3], [0.7, 0.2, 0.1], params)
        value, _ = compute_min_dcf(TrialScores([0.9, 0.8, 0.3], [0.7, 0.2, 0.1]), params)
        assert value == pytest.approx(float(expected), abs=1e-12)


class TestScoring:
    """Cosine and hyperbolic trial scores."""

    def test_cosine(self):
        """Identical, orthogonal and a hand-computed pair."""
        assert score_cosine([1.0, 2.0], [1.0, 2.0]) == pytest.approx(1.0)
        assert score_cosine([1.0, 0.0], [0.0, 3.0]) == 0.0
        assert score_cosine([1.0, 2.0], [2.0, 1.0]) == pytest.approx(0.8)

    def test_cosine_zero_vector(self):
        """Zero vectors have no direction."""
        with pytest.raises(DegenerateInputError):
            score_cosine([0.0, 0.0], [1.0, 0.0])

    def test_hyperbolic(self):
        """Negative distance: -ln 4 for the ln 4 oracle, essentially 0 for equal points."""
        assert score_hyperbolic([0.6, 0.0], [0.0, 0.0], 1.0) == pytest.approx(-math.log(4.0), abs=1e-12)
        assert score_hyperbolic([0.2, 0.3], [0.2, 0.3], 1.0) == pytest.approx(0.0, abs=1e-7)

    def test_score_rows_backends(self):
        """Both backends score row pairs; cosine stays in [-1, 1]."""
        rng = np.random.default_rng(8)
        a = rng.standard_normal((10, 4))
        b = rng.standard_normal((10, 4))
        cfg = LossConfig(num_classes=2, dim=4, c=1.0)
        cosine = score_rows(a, b, ScoringBackend.COSINE, cfg)
        hyperbolic = score_rows(a, b, 'hyperbolic', cfg)
        assert np.all(np.abs(cosine) <= 1.0)
        assert np.all(hyperbolic <= 0.0)
        assert cosine[3] == pytest.approx(score_cosine(a[3], b[3]))


class TestHierarchyCorrelation:
    """Rank agreement between center distances and tree distances."""

    def test_tree_distance(self):
        """Levels up to the lowest common ancestor."""
        assert tree_distance((0, 1), (0, 1)) == 0
        assert tree_distance((0, 1), (0, 2)) == 1
        assert tree_distance((0, 1), (3, 1)) == 2

    def test_prototypes_preserve_hierarchy(self):
        """Generated prototypes correlate positively with the tree."""
        data = generate(TreeSpec(depth=2, branching=4, dim=32, level_scales=(1.0, 0.3),
                                 samples_per_class=2, seed=0))
        cfg = LossConfig(num_classes=16, dim=32, c=1.0)
        rho = hierarchy_correlation(data.prototypes, data.class_tree, ScoringBackend.COSINE, cfg)
        assert rho > 0.5
        hyperbolic = hierarchy_correlation(data.prototypes, data.class_tree, ScoringBackend.HYPERBOLIC, cfg)
        assert hyperbolic > 0.0

    def test_flat_tree(self):
        """Without hierarchy there is nothing to correlate."""
        cfg = LossConfig(num_classes=3, dim=2)
        centers = np.eye(3)[:, :2] + 0.1
        assert hierarchy_correlation(centers, {0: (0,), 1: (1,), 2: (2,)}, ScoringBackend.COSINE, cfg) is None
