import csv
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from tqdm import tqdm

from bench.matching import DEFAULT_GATE, match_paths, wrapped_difference
from channel.dataset import DatasetRecord, generate_records
from channel.errors import DegenerateSystemError, InvalidInputError
from channel.generator import DatasetSpec, SnrSampling
from estimator.base import BaseEstimator, Method
from estimator.likelihood import crb

logger = logging.getLogger(__name__)

REPORT_HEADER = (
    'method', 'snr_bin_db', 'mse_tau', 'mse_alpha', 'mean_mo_error',
    'missed_rate', 'ghost_rate', 'n_trials', 'mean_runtime_s',
)
CRB_HEADER = ('snr_bin_db', 'crb_tau', 'crb_alpha', 'n_trials')


@dataclass(frozen=True)
class BenchConfig:
    # Lower edges of the SNR bins; the last bin is as wide as the one before.
    snr_bins_db: Tuple[float, ...] = tuple(float(edge) for edge in np.arange(0, 55, 5))
    trials_per_bin: int = 200
    gate: float = DEFAULT_GATE
    methods: Tuple[str, ...] = ('periodogram', 'cnn', 'cnn+gn', 'gn-oracle-init')
    seed: int = 0
    plots: bool = True

    def __post_init__(self):
        edges = np.asarray(self.snr_bins_db, dtype=float)
        if edges.size < 1 or np.any(np.diff(edges) <= 0):
            raise InvalidInputError(f"snr_bins_db must be increasing, got {list(self.snr_bins_db)}")
        if self.trials_per_bin < 1:
            raise InvalidInputError(f"trials_per_bin must be >= 1, got {self.trials_per_bin}")
        unknown = [m for m in self.methods if Method.from_label(m) is None]
        if unknown:
            raise InvalidInputError(f"Unknown methods {unknown}, expected {[m.value for m in Method]}")

    @property
    def bin_edges(self) -> np.ndarray:
        edges = np.asarray(self.snr_bins_db, dtype=float)
        width = edges[-1] - edges[-2] if edges.size > 1 else 5.0
        return np.append(edges, edges[-1] + width)

    def bin_of(self, snr: float) -> Optional[int]:
        edges = self.bin_edges
        index = int(np.searchsorted(edges, snr, side='right')) - 1
        return index if 0 <= index < len(edges) - 1 else None


@dataclass
class _Accumulator:
    squared_tau: List[float] = field(default_factory=list)
    squared_alpha: List[float] = field(default_factory=list)
    mo_errors: List[int] = field(default_factory=list)
    runtimes: List[float] = field(default_factory=list)
    missed: int = 0
    ghosts: int = 0
    true_paths: int = 0
    estimated_paths: int = 0

    def add(self, result, truth, gate: float):
        match = match_paths(result.paths, truth, gate)
        for est, true in match.pairs:
            self.squared_tau.append(float(wrapped_difference(result.taus[est], truth.taus[true]) ** 2))
            self.squared_alpha.append(float(wrapped_difference(result.alphas[est], truth.alphas[true]) ** 2))
        self.mo_errors.append(result.p_hat - truth.count)
        self.runtimes.append(result.wall_time)
        self.missed += len(match.unmatched_truth)
        self.ghosts += len(match.unmatched_estimates)
        self.true_paths += truth.count
        self.estimated_paths += result.p_hat


@dataclass(frozen=True)
class BenchRow:
    method: str
    snr_bin_db: float
    mse_tau: float
    mse_alpha: float
    mean_mo_error: float
    missed_rate: float
    ghost_rate: float
    n_trials: int
    mean_runtime_s: float

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, name) for name in REPORT_HEADER)


@dataclass(frozen=True)
class CrbRow:
    snr_bin_db: float
    crb_tau: float
    crb_alpha: float
    n_trials: int


def _mean(values) -> float:
    return float(np.mean(values)) if len(values) else float('nan')


def _write_csv(path: Union[str, Path], header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    return path


@dataclass(frozen=True)
class BenchReport:
    rows: Tuple[BenchRow, ...]
    crb_rows: Tuple[CrbRow, ...] = ()

    def for_method(self, method: Union[str, Method]) -> List[BenchRow]:
        label = method.value if isinstance(method, Method) else method
        return [row for row in self.rows if row.method == label]

    @property
    def methods(self) -> List[str]:
        return list(dict.fromkeys(row.method for row in self.rows))

    def to_csv(self, path: Union[str, Path]) -> Path:
        return _write_csv(path, REPORT_HEADER, [row.as_tuple() for row in self.rows])

    def crb_to_csv(self, path: Union[str, Path]) -> Path:
        return _write_csv(
            path, CRB_HEADER,
            [(row.snr_bin_db, row.crb_tau, row.crb_alpha, row.n_trials) for row in self.crb_rows],
        )


def bench_records(spec: DatasetSpec, config: BenchConfig) -> List[DatasetRecord]:
    '''
    Test snapshots spread evenly over the SNR bins: trials_per_bin records
    per bin, SNR drawn uniformly in dB inside the bin.
    '''
    edges = config.bin_edges
    records = []
    for index, (low, high) in enumerate(zip(edges[:-1], edges[1:])):
        bin_spec = dataclasses.replace(
            spec,
            snr_range_db = (float(low), float(high)),
            snr_sampling = SnrSampling.UNIFORM_DB,
            count = config.trials_per_bin,
            seed = config.seed + index,
        )
        records.extend(generate_records(bin_spec))
    return records


def evaluate_run(
    records: Iterable[DatasetRecord],
    estimators: Dict[Method, BaseEstimator],
    config: BenchConfig = BenchConfig(),
) -> BenchReport:
    '''
    Run every estimator on every record, binned by the record's SNR.

    Squared errors are averaged over matched pairs only; unmatched truth
    and unmatched estimates are reported as missed and ghost rates. Bins
    stop taking records after trials_per_bin; records outside all bins
    are skipped.
    '''
    n_bins = len(config.bin_edges) - 1
    accumulators = {
        (method, b): _Accumulator() for method in estimators for b in range(n_bins)
    }
    crb_tau: Dict[int, List[float]] = {b: [] for b in range(n_bins)}
    crb_alpha: Dict[int, List[float]] = {b: [] for b in range(n_bins)}
    trials = np.zeros(n_bins, dtype=int)

    for record in tqdm(records, desc="bench", leave=False):
        snapshot, truth = record.snapshot, record.truth
        if truth is None or not snapshot.sigma2:
            raise InvalidInputError("Benchmark records need ground truth and a noise variance")
        b = config.bin_of(snapshot.snr_db)
        if b is None or trials[b] >= config.trials_per_bin:
            continue
        trials[b] += 1

        for method, estimator in estimators.items():
            accumulators[(method, b)].add(estimator.estimate(snapshot), truth, config.gate)

        try:
            bounds = crb(truth, snapshot.grid, snapshot.sigma2).reshape(-1, 4)
            crb_tau[b].append(float(bounds[:, 2].mean()))
            crb_alpha[b].append(float(bounds[:, 3].mean()))
        except DegenerateSystemError as error:
            logger.debug("No CRB for a degenerate record: %s", error)

    rows = []
    for method in estimators:
        for b in range(n_bins):
            acc = accumulators[(method, b)]
            if not acc.mo_errors:
                continue
            rows.append(BenchRow(
                method = method.value,
                snr_bin_db = float(config.bin_edges[b]),
                mse_tau = _mean(acc.squared_tau),
                mse_alpha = _mean(acc.squared_alpha),
                mean_mo_error = _mean(acc.mo_errors),
                missed_rate = acc.missed / acc.true_paths if acc.true_paths else 0.0,
                ghost_rate = acc.ghosts / acc.estimated_paths if acc.estimated_paths else 0.0,
                n_trials = len(acc.mo_errors),
                mean_runtime_s = _mean(acc.runtimes),
            ))
    crb_rows = tuple(
        CrbRow(float(config.bin_edges[b]), _mean(crb_tau[b]), _mean(crb_alpha[b]), len(crb_tau[b]))
        for b in range(n_bins) if crb_tau[b]
    )
    logger.info("Benchmarked %d records over %d bins", int(trials.sum()), int(np.count_nonzero(trials)))
    return BenchReport(rows=tuple(rows), crb_rows=crb_rows)
