"""Main application entry point with CLI interface."""
import argparse
import csv
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import List, Optional

from .config import Config, setup_logging
from .errors import ArgumentError, ConfigError, DivergenceError, FormatError, HypSoftmaxError, MissingScoreError
from .experiment_config import ExperimentConfig, load_experiment_config, write_key_values, write_manifest
from .metrics import compute_eer, compute_min_dcf
from .models import DcfParams, LabeledDataset, TreeSpec
from .synthdata import default_level_scales, generate, load_embeddings, save_embeddings
from .trainer import fit, trial_scores, write_report_csv
from .trial_io import Trial, join_scores, read_scores, read_trials, write_scores, write_trials

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ['param', 'value', 'seed', 'final_loss', 'eer', 'min_dcf', 'wall_time_s']

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DIVERGED = 3
EXIT_IO = 4


@dataclass
class PointResult:
    """Outcome of one sweep point."""
    param: str
    value: str
    seed: int
    final_loss: float
    eer: float
    min_dcf: float
    wall_time_s: float
    hierarchy_rho: Optional[float] = None


def load_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    """Read the configured dataset file, or generate the configured synthetic tree."""
    if cfg.dataset is not None:
        return load_embeddings(cfg.dataset)
    return generate(cfg.tree_spec())


def point_dirname(param: Optional[str], value: Optional[float]) -> str:
    return 'single' if param is None else f"{param}={value!r}"


def run_point(cfg: ExperimentConfig, param: Optional[str], value: Optional[float]) -> PointResult:
    """Train and evaluate one sweep point and write its report, trials and scores.

    Every point starts from the same seeds, so the swept value is the only
    thing that differs between points.
    """
    started = time.perf_counter()
    point = cfg.at_point(param, value)
    data = load_dataset(point)
    loss_cfg = point.loss_config(data.num_classes)
    report, trainer, trials = fit(data, point.embedder_spec(data.dim), point.optim_spec(), loss_cfg, point.loss,
                                  scoring=point.scoring, train_frac=point.train_frac,
                                  trials_per_class=point.trials_per_class, split_seed=point.split_seed,
                                  dcf=DcfParams(p_target=point.p_target))

    out_dir = os.path.join(cfg.output_dir, point_dirname(param, value))
    os.makedirs(out_dir, exist_ok=True)
    write_report_csv(report, os.path.join(out_dir, 'report.csv'))
    trial_list = [Trial(is_target=bool(target), enroll_id=f"u{enroll}", test_id=f"u{test}")
                  for (enroll, test), target in zip(trials.pairs, trials.is_target)]
    write_trials(os.path.join(out_dir, 'trials.txt'), trial_list)
    write_scores(os.path.join(out_dir, 'scores.txt'), trial_list,
                 trial_scores(trainer.embedder, trials, report.scoring, loss_cfg))

    return PointResult(param=param or '', value='' if value is None else repr(value), seed=cfg.seed,
                       final_loss=report.final_loss, eer=report.final_eer, min_dcf=report.final_min_dcf,
                       wall_time_s=time.perf_counter() - started, hierarchy_rho=report.hierarchy_rho)


class ExperimentRunner:
    """Runs every sweep point of an experiment and collects the results table."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.results_path = os.path.join(cfg.output_dir, Config.RESULTS_FILENAME)

    def run(self) -> List[PointResult]:
        """Run all points; rows are returned and written in sweep order.

        Stops at the first diverged point. Rows completed before it are still
        written, then the DivergenceError propagates.
        """
        os.makedirs(self.cfg.output_dir, exist_ok=True)
        write_manifest(self.cfg, os.path.join(self.cfg.output_dir, Config.MANIFEST_FILENAME))
        points = self.cfg.sweep_points
        logger.info(f"Running {len(points)} point(s) of {self.cfg.loss.value} "
                    f"with {self.cfg.workers} worker(s), output in {self.cfg.output_dir}")

        results: List[PointResult] = []
        try:
            if self.cfg.workers > 1 and len(points) > 1:
                with ProcessPoolExecutor(max_workers=self.cfg.workers) as pool:
                    futures = [pool.submit(run_point, self.cfg, param, value) for param, value in points]
                    try:
                        for future in futures:
                            results.append(future.result())
                            self._log_point(results[-1])
                    except DivergenceError:
                        for future in futures:
                            future.cancel()
                        raise
            else:
                for param, value in points:
                    results.append(run_point(self.cfg, param, value))
                    self._log_point(results[-1])
        except DivergenceError as e:
            param, value = points[len(results)]
            logger.error(f"Sweep point {point_dirname(param, value)} diverged: {e}")
            raise
        finally:
            self.write_results(results)
        return results

    def _log_point(self, result: PointResult):
        label = f"{result.param}={result.value}" if result.param else 'single point'
        logger.info(f"{label}: loss {result.final_loss:.4f}, EER {result.eer:.4f}, minDCF {result.min_dcf:.4f}")

    def write_results(self, results: List[PointResult]):
        with open(self.results_path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=RESULT_COLUMNS, extrasaction='ignore', lineterminator='\n')
            writer.writeheader()
            for result in results:
                row = asdict(result)
                for key in ('final_loss', 'eer', 'min_dcf'):
                    row[key] = repr(float(row[key]))
                row['wall_time_s'] = f"{result.wall_time_s:.3f}"
                writer.writerow(row)
        logger.info(f"Wrote {len(results)} result row(s) to {self.results_path}")


def format_summary(result: PointResult) -> str:
    label = f"{result.param}={result.value} " if result.param else ''
    rho = 'n/a' if result.hierarchy_rho is None else f"{result.hierarchy_rho:.4f}"
    return (f"{label}loss={result.final_loss:.6f} EER={result.eer:.6f} minDCF={result.min_dcf:.6f} "
            f"hierarchy_rho={rho}")


def run_command(args) -> int:
    cfg = load_experiment_config(args.config)
    for result in ExperimentRunner(cfg).run():
        print(format_summary(result))
    return EXIT_OK


def score_command(args) -> int:
    trials = read_trials(args.trials)
    scores = join_scores(trials, read_scores(args.scores))
    dcf = DcfParams(p_target=args.p_target, c_miss=args.c_miss, c_fa=args.c_fa)
    eer, thr_eer = compute_eer(scores)
    min_dcf, thr_dcf = compute_min_dcf(scores, dcf)
    print(f"EER={eer:.6f} minDCF={min_dcf:.6f} thr_eer={thr_eer:.6f} thr_dcf={thr_dcf:.6f}")
    return EXIT_OK


def _parse_scales(text: str):
    try:
        return tuple(float(item) for item in text.split(',') if item.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def gen_data_command(args) -> int:
    spec = TreeSpec(depth=args.depth, branching=args.branching, dim=args.dim,
                    level_scales=args.level_scales or default_level_scales(args.depth),
                    noise_sigma=args.noise_sigma, samples_per_class=args.samples_per_class, seed=args.seed)
    data = generate(spec)
    save_embeddings(data, args.output)
    write_key_values(f"{args.output}.manifest", asdict(spec), header="Synthetic dataset specification")
    print(f"Wrote {len(data.labels)} vectors in {data.num_classes} classes to {args.output}")
    return EXIT_OK


def create_cli_parser() -> argparse.ArgumentParser:
    """Create command line argument parser."""
    parser = argparse.ArgumentParser(
        description='hyp-softmax - train and evaluate embeddings with hyperbolic softmax losses'
    )
    parser.add_argument(
        '--debug',
        action='store_true',
        help='Enable debug logging'
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    run_parser = subparsers.add_parser('run', help='Run an experiment or parameter sweep from a config file')
    run_parser.add_argument('config', help='Path to a key = value experiment file')
    run_parser.set_defaults(handler=run_command)

    score_parser = subparsers.add_parser('score', help='Compute EER and minDCF from a trial list and a score file')
    score_parser.add_argument('--trials', required=True, help='Trial list: <0|1> <enroll_id> <test_id> per line')
    score_parser.add_argument('--scores', required=True, help='Scores: <enroll_id> <test_id> <score> per line')
    score_parser.add_argument('--p-target', type=float, default=Config.P_TARGET,
                              help=f'Target prior for minDCF (default {Config.P_TARGET})')
    score_parser.add_argument('--c-miss', type=float, default=Config.C_MISS, help='Cost of a miss')
    score_parser.add_argument('--c-fa', type=float, default=Config.C_FA, help='Cost of a false alarm')
    score_parser.set_defaults(handler=score_command)

    gen_parser = subparsers.add_parser('gen-data', help='Generate a synthetic hierarchical dataset')
    gen_parser.add_argument('--depth', type=int, default=Config.TREE_DEPTH, help='Tree depth')
    gen_parser.add_argument('--branching', type=int, default=Config.TREE_BRANCHING, help='Children per node')
    gen_parser.add_argument('--dim', type=int, default=Config.TREE_DIM, help='Vector dimension')
    gen_parser.add_argument('--level-scales', type=_parse_scales, default=None,
                            help='Comma-separated offset scale per level (default 1, 0.3, 0.09, ...)')
    gen_parser.add_argument('--noise-sigma', type=float, default=Config.TREE_NOISE_SIGMA,
                            help='Standard deviation of sample noise')
    gen_parser.add_argument('--samples-per-class', type=int, default=Config.TREE_SAMPLES_PER_CLASS,
                            help='Samples drawn per leaf class')
    gen_parser.add_argument('--seed', type=int, default=0, help='Random seed')
    gen_parser.add_argument('--output', required=True, help='Output dataset path')
    gen_parser.set_defaults(handler=gen_data_command)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit status."""
    parser = create_cli_parser()
    args = parser.parse_args(argv)

    # Set up logging
    setup_logging()
    if args.debug:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        return args.handler(args)
    except (ConfigError, FormatError, MissingScoreError, ArgumentError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_INVALID
    except DivergenceError as e:
        logger.error(f"Training diverged: {e}")
        return EXIT_DIVERGED
    except OSError as e:
        logger.error(f"I/O failure: {e}")
        return EXIT_IO
    except HypSoftmaxError as e:
        logger.error(f"Application error: {e}", exc_info=True)
        return EXIT_INVALID
    except KeyboardInterrupt:
        logger.info("Operation cancelled by user")
        return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
