"""Tests for experiment config parsing, validation and manifests."""
import pytest

from src.hyp_softmax.errors import ConfigError
from src.hyp_softmax.experiment_config import ExperimentConfig, load_experiment_config, write_manifest
from src.hyp_softmax.models import LossKind, ScoringBackend


class TestLoadExperimentConfig:
    """Parsing key = value experiment files."""

    def write(self, tmp_path, text, name='experiment.cfg'):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    def test_defaults_with_comments(self, tmp_path):
        """Comments and blank lines are ignored; unset keys keep their defaults."""
        path = self.write(tmp_path, "# HAM-Softmax baseline\n\nloss = ham\n# a sweep follows\nepochs = 5\n")
        cfg = load_experiment_config(path)
        assert cfg.loss == LossKind.HAM
        assert cfg.epochs == 5
        assert cfg.s == 30.0
        assert cfg.sweep_points == ((None, None),)

    def test_typed_values(self, tmp_path):
        """Booleans, enums, optionals and lists parse to their types."""
        path = self.write(tmp_path, "loss = joint_eh\nshare_centers = true\nscoring = cosine\n"
                                    "sweep_param = euclidean_weight\nsweep_values = 0.0, 0.25,1.0\n"
                                    "tree_depth = 3\ntree_level_scales = 1.0,0.5,0.25\n")
        cfg = load_experiment_config(path)
        assert cfg.loss == LossKind.JOINT_EH
        assert cfg.share_centers is True
        assert cfg.scoring == ScoringBackend.COSINE
        assert cfg.sweep_values == (0.0, 0.25, 1.0)
        assert cfg.tree_spec().level_scales == (1.0, 0.5, 0.25)
        assert cfg.sweep_points == (('euclidean_weight', 0.0), ('euclidean_weight', 0.25),
                                    ('euclidean_weight', 1.0))

    def test_manifest_reparses_equal(self, tmp_path):
        """A written manifest loads back to the same config."""
        cfg = ExperimentConfig(loss=LossKind.H, c=0.1 + 0.2, lr0=3e-4, seed=11, sweep_param='s',
                               sweep_values=(5.0, 10.0), share_centers=True, output_dir=str(tmp_path / 'out'))
        path = str(tmp_path / 'manifest.cfg')
        write_manifest(cfg, path)
        assert load_experiment_config(path) == cfg

    def test_manifest_with_dataset(self, tmp_path):
        """Manifests of dataset runs carry no tree keys."""
        dataset = self.write(tmp_path, "0 1 2\n1 3 4\n", name='data.txt')
        cfg = load_experiment_config(self.write(tmp_path, f"dataset = {dataset}\n"))
        path = tmp_path / 'manifest.cfg'
        write_manifest(cfg, str(path))
        assert 'tree_depth' not in path.read_text()
        assert load_experiment_config(str(path)) == cfg

    def test_missing_file(self, tmp_path):
        """An absent config file is an I/O error, not a config error."""
        with pytest.raises(FileNotFoundError):
            load_experiment_config(str(tmp_path / 'absent.cfg'))

    @pytest.mark.parametrize('text,field', [
        ("learning_rate = 0.1\n", 'learning_rate'),
        ("epochs = ten\n", 'epochs'),
        ("loss = triplet\n", 'loss'),
        ("share_centers = maybe\n", 'share_centers'),
        ("c = 0\n", 'c'),
        ("c = inf\n", 'c'),
        ("s = -1\n", 's'),
        ("euclidean_weight = 1.5\n", 'euclidean_weight'),
        ("activation = gelu\n", 'activation'),
        ("train_frac = 1.0\n", 'train_frac'),
        ("p_target = 0\n", 'p_target'),
        ("workers = 0\n", 'workers'),
        ("sweep_param = lr0\nsweep_values = 0.1\n", 'sweep_param'),
        ("sweep_param = c\n", 'sweep_values'),
        ("sweep_values = 1,2\n", 'sweep_param'),
        ("sweep_param = c\nsweep_values = 1,-2\n", 'sweep_values'),
        ("tree_depth = 3\ntree_level_scales = 1,0.5\n", 'tree_level_scales'),
        ("tree_depth = 40\ntree_branching = 2\n", 'tree_depth'),
        ("dataset = /nonexistent/data.txt\n", 'dataset'),
    ])
    def test_invalid(self, tmp_path, text, field):
        """Invalid entries are rejected naming the offending key."""
        with pytest.raises(ConfigError) as excinfo:
            load_experiment_config(self.write(tmp_path, text))
        assert excinfo.value.field == field

    def test_dataset_excludes_tree_keys(self, tmp_path):
        """Generator settings make no sense alongside an embeddings file."""
        dataset = self.write(tmp_path, "0 1 2\n", name='data.txt')
        with pytest.raises(ConfigError) as excinfo:
            load_experiment_config(self.write(tmp_path, f"dataset = {dataset}\ntree_dim = 4\n"))
        assert excinfo.value.field == 'tree_dim'


class TestExperimentConfig:
    """Derived settings."""

    def test_default_curvature(self):
        """Unset curvature follows the loss kind; an explicit value wins."""
        assert ExperimentConfig(loss=LossKind.H).curvature == 5.0
        assert ExperimentConfig(loss=LossKind.HAM).curvature == 3.0
        assert ExperimentConfig(loss=LossKind.HAM, c=0.5).curvature == 0.5

    def test_derived_seeds(self):
        """Each random stream gets its own seed offset."""
        cfg = ExperimentConfig(seed=10)
        assert cfg.tree_spec().seed == 10
        assert cfg.embedder_spec(32).seed == 11
        assert cfg.optim_spec().seed == 12
        assert cfg.split_seed == 13

    def test_at_point(self):
        """Sweep points override one field and leave the rest alone."""
        cfg = ExperimentConfig(sweep_param='m', sweep_values=(0.1, 0.2))
        point = cfg.at_point('m', 0.2)
        assert point.m == 0.2
        assert point.s == cfg.s
        assert cfg.at_point(None, None) is cfg

    def test_loss_config(self):
        """Loss settings are assembled for a class count."""
        loss_cfg = ExperimentConfig(loss=LossKind.AAM, m=0.3, output_dim=8).loss_config(12)
        assert loss_cfg.num_classes == 12
        assert loss_cfg.dim == 8
        assert loss_cfg.m == 0.3
