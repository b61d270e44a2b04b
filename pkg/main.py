import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from bench.config import RunConfig, load_config
from bench.evaluate import bench_records, evaluate_run
from bench.plots import plot_inference_example, plot_model_order, plot_mse
from channel.dataset import DatasetReader, dataset_hash, generate_dataset
from channel.errors import ConfigError, DegenerateSystemError, MissingWeightsError, SolverError
from estimator import CNNEstimator, OracleInitEstimator, PeriodogramEstimator, RefinedCNNEstimator
from estimator.base import BaseEstimator, EstimationResult, Method
from estimator.gauss_newton import DIAGNOSTICS_HEADER, gauss_newton_refine
from estimator.likelihood import PARAMETER_NAMES, crb
from network.training import ModelWeights, train

logger = logging.getLogger('delay-doppler')

METHOD_TO_ESTIMATOR = {
    Method.PERIODOGRAM: PeriodogramEstimator,
    Method.CNN: CNNEstimator,
    Method.CNN_GN: RefinedCNNEstimator,
    Method.GN_ORACLE_INIT: OracleInitEstimator,
}
NEEDS_WEIGHTS = {Method.CNN, Method.CNN_GN}
PLOT_PANELS = 4

ESTIMATES_HEADER = (
    'index', 'method', 'path', 'tau', 'alpha', 'gamma_re', 'gamma_im', 'wall_time_s', 'tau_s', 'alpha_hz',
)


def get_argparser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description = "Delay-Doppler estimation toolkit"
    )
    parser.add_argument(
        '--verbose',
        action = 'store_true',
        help = 'Debug logging'
    )
    commands = parser.add_subparsers(dest='command', required=True)

    def add_command(name: str, help: str, dataset_required: bool = False) -> argparse.ArgumentParser:
        command = commands.add_parser(name, help=help)
        command.add_argument(
            '--config',
            default = None,
            help = 'JSON config document (default: built-in defaults)'
        )
        command.add_argument(
            '--dataset',
            required = dataset_required,
            default = None,
            help = 'Dataset stem (<stem>.json + <stem>.bin)'
        )
        command.add_argument(
            '--out',
            default = 'out',
            help = 'Output directory (default: out)'
        )
        command.add_argument(
            '--seed',
            type = int,
            default = None,
            help = 'Random seed, overrides the config'
        )
        command.add_argument(
            '--limit',
            type = int,
            default = None,
            help = 'Only process the first N records'
        )
        return command

    gen = add_command('gen', 'Generate the dataset splits')
    gen.add_argument(
        '--split',
        action = 'append',
        default = None,
        help = 'Only generate this split (repeatable)'
    )
    gen.add_argument(
        '--count',
        type = int,
        default = None,
        help = 'Override the record count of every generated split'
    )
    gen.add_argument(
        '--workers',
        type = int,
        default = 1,
        help = 'Generator processes (default: 1)'
    )

    train_command = add_command('train', 'Train the network', dataset_required=True)
    train_command.add_argument(
        '--validation',
        default = None,
        help = 'Validation dataset stem'
    )
    train_command.add_argument(
        '--weights',
        default = None,
        help = 'Output weights stem (default: <out>/weights)'
    )

    for name, help in (
        ('infer', 'Estimate paths of every record of a dataset'),
        ('refine', 'Gauss-Newton refinement of network (or periodogram) estimates'),
    ):
        command = add_command(name, help, dataset_required=True)
        command.add_argument(
            '--weights',
            default = None,
            help = 'Trained weights stem'
        )
        if name == 'infer':
            command.add_argument(
                '--methods',
                default = 'cnn',
                help = f'Comma-separated methods out of {[m.value for m in Method]} (default: cnn)'
            )
            command.add_argument(
                '--plot',
                action = 'store_true',
                help = f'Plot the estimates of the first {PLOT_PANELS} records over their spectra'
            )

    bench = add_command('bench', 'MSE and model-order benchmark against SNR')
    bench.add_argument(
        '--weights',
        default = None,
        help = 'Trained weights stem, needed by the cnn methods'
    )
    bench.add_argument(
        '--methods',
        default = None,
        help = 'Comma-separated methods (default: from config)'
    )
    bench.add_argument(
        '--snr-bins',
        default = None,
        help = 'Comma-separated lower SNR bin edges in dB'
    )

    add_command('crb', 'Cramer-Rao bounds at the truth of every record', dataset_required=True)
    return parser


def parse_methods(text: str) -> List[Method]:
    methods = []
    for label in text.split(','):
        method = Method.from_label(label.strip())
        if method is None:
            raise ConfigError(f"unknown method '{label}', expected one of {[m.value for m in Method]}", '--methods')
        methods.append(method)
    return methods


def parse_snr_bins(text: str) -> tuple:
    try:
        return tuple(float(edge) for edge in text.split(','))
    except ValueError as error:
        raise ConfigError(str(error), '--snr-bins') from error


def load_weights(stem: Optional[str]) -> Optional[ModelWeights]:
    if stem is None:
        return None
    return ModelWeights.load(stem)


def build_estimators(methods: List[Method], config: RunConfig, weights: Optional[ModelWeights]) -> Dict[Method, BaseEstimator]:
    estimators = {}
    for method in methods:
        estimator_class = METHOD_TO_ESTIMATOR[method]
        if method in NEEDS_WEIGHTS and weights is None:
            logger.warning("Skipping method '%s': no trained weights given", method.value)
            continue
        if method == Method.PERIODOGRAM:
            estimators[method] = estimator_class(p_max=config.dataset.p_max, config=config.periodogram)
        elif method == Method.CNN:
            estimators[method] = estimator_class(weights, config.windows)
        elif method == Method.CNN_GN:
            estimators[method] = estimator_class(weights, config.windows, config.refine)
        else:
            estimators[method] = estimator_class(config.refine)
    return estimators


def _records(stem: str, limit: Optional[int]):
    reader = DatasetReader(stem)
    count = len(reader) if limit is None else min(limit, len(reader))
    return [(index, reader[index]) for index in range(count)]


def _estimate_rows(index: int, label: str, result: EstimationResult) -> list:
    rows = []
    gammas = result.gammas
    for path in range(result.p_hat):
        tau, alpha = float(result.taus[path]), float(result.alphas[path])
        gamma = complex(gammas[path]) if gammas is not None else complex('nan')
        rows.append((index, label, path, tau, alpha, gamma.real, gamma.imag, result.wall_time))
    return rows


def _write_estimates(path: Path, rows: list, grid) -> Path:
    with path.open('w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(ESTIMATES_HEADER)
        for row in rows:
            tau, alpha = row[3], row[4]
            writer.writerow((*row, tau / grid.delta_f, alpha / grid.delta_t))
    return path


def run_gen(args, config: RunConfig) -> int:
    out = Path(args.out)
    splits = config.splits
    if args.split:
        unknown = set(args.split) - set(splits)
        if unknown:
            raise ConfigError(f"unknown splits {sorted(unknown)}, expected {sorted(splits)}", '--split')
        splits = {name: splits[name] for name in args.split}
    seed = config.dataset.seed if args.seed is None else args.seed

    for offset, (name, count) in enumerate(splits.items()):
        spec = dataclasses.replace(
            config.dataset,
            count = count if args.count is None else args.count,
            seed = seed + offset,
        )
        header = generate_dataset(out / name, spec, workers=args.workers)
        print(f"Wrote {header['count']} records to {out / name} ({header['rejections']} rejected draws)")
    return 0


def run_train(args, config: RunConfig) -> int:
    training = config.training
    if args.seed is not None:
        training = dataclasses.replace(training, seed=args.seed)
    records = DatasetReader(args.dataset)
    validation = DatasetReader(args.validation) if args.validation else None

    weights = train(
        records,
        config.network,
        training,
        bank = config.windows,
        validation = validation,
        dataset_hash = dataset_hash(args.dataset),
    )
    stem = Path(args.weights) if args.weights else Path(args.out) / 'weights'
    weights.save(stem)
    print(f"Saved weights to {stem}.pt (best loss {weights.training['best_loss']:.5f})")
    return 0


def run_infer(args, config: RunConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    methods = parse_methods(args.methods)
    estimators = build_estimators(methods, config, load_weights(args.weights))
    if not estimators:
        raise MissingWeightsError("No runnable method: the requested methods need --weights")

    rows, grid = [], None
    panels, panel_estimates = [], []
    for index, record in _records(args.dataset, args.limit):
        grid = record.snapshot.grid
        results = {method: estimator.estimate(record.snapshot) for method, estimator in estimators.items()}
        for method, result in results.items():
            rows.extend(_estimate_rows(index, method.value, result))
        if args.plot and len(panels) < PLOT_PANELS:
            panels.append(record.snapshot)
            panel_estimates.append(results)
    if grid is None:
        grid = config.grid
    path = _write_estimates(out / 'estimates.csv', rows, grid)
    print(f"Wrote {len(rows)} path estimates to {path}")
    if panels:
        figure = plot_inference_example(panels, panel_estimates, out / 'inference_example.png')
        print(f"Plotted {len(panels)} records to {figure}")
    return 0


def run_refine(args, config: RunConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    weights = load_weights(args.weights)
    if weights is not None:
        initializer = CNNEstimator(weights, config.windows)
    else:
        logger.info("No weights given, refining periodogram estimates")
        initializer = PeriodogramEstimator(p_max=config.dataset.p_max, config=config.periodogram)
    label = f"{initializer.method.value}+gn"

    rows, diagnostic_rows, grid = [], [], config.grid
    for index, record in _records(args.dataset, args.limit):
        grid = record.snapshot.grid
        init = initializer.estimate(record.snapshot)
        if init.p_hat == 0:
            logger.warning("Record %d: no initial paths, nothing to refine", index)
            continue
        refined = gauss_newton_refine(init, record.snapshot, None, config.refine)
        rows.extend(_estimate_rows(index, label, refined))
        diagnostic_rows.extend((index, *row) for row in refined.diagnostics['refinement'].rows())

    _write_estimates(out / 'estimates.csv', rows, grid)
    with (out / 'refine_diagnostics.csv').open('w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(('index', *DIAGNOSTICS_HEADER))
        writer.writerows(diagnostic_rows)
    print(f"Refined {len({row[0] for row in rows})} records into {out}")
    return 0


def run_bench(args, config: RunConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bench_config = config.bench
    overrides = {}
    if args.seed is not None:
        overrides['seed'] = args.seed
    if args.methods is not None:
        overrides['methods'] = tuple(m.value for m in parse_methods(args.methods))
    if args.snr_bins is not None:
        overrides['snr_bins_db'] = parse_snr_bins(args.snr_bins)
    try:
        bench_config = dataclasses.replace(bench_config, **overrides)
    except SolverError as error:
        raise ConfigError(str(error), 'bench') from error

    methods = [Method.from_label(label) for label in bench_config.methods]
    estimators = build_estimators(methods, config, load_weights(args.weights))
    if args.dataset:
        records = [record for _, record in _records(args.dataset, args.limit)]
    else:
        records = bench_records(config.dataset, bench_config)

    report = evaluate_run(records, estimators, bench_config)
    report.to_csv(out / 'report.csv')
    report.crb_to_csv(out / 'crb.csv')
    if bench_config.plots and report.rows:
        plot_mse(report, out / 'mse.png')
        plot_model_order(report, out / 'model_order.png')

    for row in report.rows:
        print(
            f"{row.method:>15} {row.snr_bin_db:5.1f} dB: mse_tau={row.mse_tau:.3g} "
            f"mse_alpha={row.mse_alpha:.3g} mo_error={row.mean_mo_error:+.2f} "
            f"runtime={1e3 * row.mean_runtime_s:.1f} ms"
        )
    return 0


def run_crb(args, config: RunConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for index, record in _records(args.dataset, args.limit):
        snapshot = record.snapshot
        try:
            bounds = crb(record.truth, snapshot.grid, snapshot.sigma2).reshape(-1, len(PARAMETER_NAMES))
        except DegenerateSystemError as error:
            logger.warning("Record %d: %s", index, error)
            continue
        rows.extend((index, path, *bound) for path, bound in enumerate(bounds))

    with (out / 'crb_bounds.csv').open('w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(('index', 'path', *(f"var_{name}" for name in PARAMETER_NAMES)))
        writer.writerows(rows)
    print(f"Wrote bounds for {len(rows)} paths to {out / 'crb_bounds.csv'}")
    return 0


COMMANDS = {
    'gen': run_gen,
    'train': run_train,
    'infer': run_infer,
    'refine': run_refine,
    'bench': run_bench,
    'crb': run_crb,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = get_argparser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level = logging.DEBUG if args.verbose else logging.INFO,
        format = '%(asctime)s %(name)s %(levelname)s: %(message)s',
    )

    try:
        config = load_config(args.config)
        return COMMANDS[args.command](args, config)
    except ConfigError as error:
        print(f"Config error: {error}", file=sys.stderr)
        return 2
    except SolverError as error:
        print(f"Error: {error}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
