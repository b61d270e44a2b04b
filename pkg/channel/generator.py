from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from channel.errors import GenerationError, InvalidInputError
from channel.model import add_noise, synthesize
from channel.state import ChannelSnapshot, PathSet, SamplingGrid
from network.labels import CellGrid, assign_cell


class SnrSampling(Enum):
    # Noise variance uniform in the linear domain: most samples land at low SNR.
    UNIFORM_LINEAR = 'uniform-linear'
    UNIFORM_DB = 'uniform-db'

    @classmethod
    def from_label(cls, label: str) -> Optional['SnrSampling']:
        for mode in cls:
            if mode.value == label:
                return mode
        return None


@dataclass(frozen=True)
class DatasetSpec:
    '''
    Distribution of a synthetic dataset.

    Two paths collide only when they are closer than min_separation in
    BOTH tau and alpha; no label cell may receive more than
    cell_grid.capacity paths. Colliding draws are rejected and redrawn.
    '''
    grid: SamplingGrid = field(default_factory = lambda: SamplingGrid(64, 64))
    path_count_range: Tuple[int, int] = (1, 20)
    min_separation: float = 0.003125
    magnitude_range: Tuple[float, float] = (0.001, 1.0)
    phase_range: Tuple[float, float] = (0.0, 2 * np.pi)
    snr_range_db: Tuple[float, float] = (0.0, 50.0)
    snr_sampling: SnrSampling = SnrSampling.UNIFORM_LINEAR
    count: int = 1000
    seed: int = 0
    cell_grid: CellGrid = field(default_factory = CellGrid)
    p_max: int = 20
    max_attempts: int = 1000

    def __post_init__(self):
        low, high = self.path_count_range
        if not (1 <= low <= high <= self.p_max):
            raise InvalidInputError(
                f"path_count_range {self.path_count_range} must lie within [1, {self.p_max}]"
            )
        if self.p_max > self.cell_grid.n_slots:
            raise InvalidInputError(
                f"p_max={self.p_max} exceeds the {self.cell_grid.n_slots} label slots"
            )
        if not self.min_separation > 0:
            raise InvalidInputError(f"min_separation must be positive, got {self.min_separation}")
        if not (0 < self.magnitude_range[0] <= self.magnitude_range[1]):
            raise InvalidInputError(f"magnitude_range {self.magnitude_range} must be positive and ordered")
        if not (np.all(np.isfinite(self.snr_range_db)) and self.snr_range_db[0] <= self.snr_range_db[1]):
            raise InvalidInputError(f"snr_range_db {self.snr_range_db} must be finite and ordered")
        if self.count < 0:
            raise InvalidInputError(f"count must be >= 0, got {self.count}")

    def to_dict(self) -> dict:
        return {
            'grid': self.grid.to_dict(),
            'path_count_range': list(self.path_count_range),
            'min_separation': self.min_separation,
            'magnitude_range': list(self.magnitude_range),
            'phase_range': list(self.phase_range),
            'snr_range_db': list(self.snr_range_db),
            'snr_sampling': self.snr_sampling.value,
            'count': self.count,
            'seed': self.seed,
            'cell_grid': {
                'n_delay_cells': self.cell_grid.n_delay_cells,
                'n_doppler_cells': self.cell_grid.n_doppler_cells,
                'capacity': self.cell_grid.capacity,
            },
            'p_max': self.p_max,
            'max_attempts': self.max_attempts,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'DatasetSpec':
        data = dict(data)
        data['grid'] = SamplingGrid.from_dict(data['grid'])
        data['cell_grid'] = CellGrid(**data['cell_grid'])
        data['snr_sampling'] = SnrSampling(data['snr_sampling'])
        for key in ('path_count_range', 'magnitude_range', 'phase_range', 'snr_range_db'):
            data[key] = tuple(data[key])
        return cls(**data)


@dataclass(frozen=True, eq=False)
class GeneratedSample:
    snapshot: ChannelSnapshot
    noise_seed: int


class SnapshotGenerator:
    '''
    Draws random multipath snapshots for a DatasetSpec.

    All randomness of record `index` derives from (spec.seed, index), so
    records can be produced in any order or in parallel with identical
    results. `rejections` counts redrawn paths.
    '''
    def __init__(self, spec: DatasetSpec):
        self.spec = spec
        self.rejections = 0

    def record_rng(self, index: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.spec.seed, index]))

    def _collides(self, tau: float, alpha: float, taus: list, alphas: list) -> bool:
        if not taus:
            return False
        close_tau = np.abs(np.asarray(taus) - tau) < self.spec.min_separation
        close_alpha = np.abs(np.asarray(alphas) - alpha) < self.spec.min_separation
        return bool(np.any(close_tau & close_alpha))

    def sample_paths(self, rng: np.random.Generator) -> PathSet:
        spec = self.spec
        low, high = spec.path_count_range
        n_paths = int(rng.integers(low, high + 1))

        taus, alphas = [], []
        occupancy = np.zeros((spec.cell_grid.n_delay_cells, spec.cell_grid.n_doppler_cells), dtype=int)
        for _ in range(n_paths):
            for _attempt in range(spec.max_attempts):
                tau, alpha = rng.random(2)
                i, j = assign_cell(tau, alpha, spec.cell_grid)
                if occupancy[i, j] < spec.cell_grid.capacity and not self._collides(tau, alpha, taus, alphas):
                    break
                self.rejections += 1
            else:
                raise GenerationError(
                    f"Could not place path {len(taus) + 1} of {n_paths} "
                    f"after {spec.max_attempts} attempts"
                )
            taus.append(tau)
            alphas.append(alpha)
            occupancy[i, j] += 1

        magnitudes = rng.uniform(*spec.magnitude_range, size=n_paths)
        phases = rng.uniform(*spec.phase_range, size=n_paths)
        gammas = magnitudes * np.exp(1j * phases)
        return PathSet(gammas, np.array(taus), np.array(alphas))

    def draw_noise_variance(self, signal_power: float, rng: np.random.Generator) -> float:
        low_db, high_db = self.spec.snr_range_db
        if self.spec.snr_sampling == SnrSampling.UNIFORM_LINEAR:
            sigma2_min = signal_power * 10 ** (-high_db / 10)
            sigma2_max = signal_power * 10 ** (-low_db / 10)
            return float(rng.uniform(sigma2_min, sigma2_max))
        snr = rng.uniform(low_db, high_db)
        return float(signal_power * 10 ** (-snr / 10))

    def generate(self, index: int) -> GeneratedSample:
        rng = self.record_rng(index)
        truth = self.sample_paths(rng)
        clean = synthesize(truth, self.spec.grid)
        signal_power = float(np.mean(np.abs(clean) ** 2))
        sigma2 = self.draw_noise_variance(signal_power, rng)
        noise_seed = int(rng.integers(0, 2 ** 63))
        data = add_noise(clean, sigma2, noise_seed).astype(np.complex64)
        snapshot = ChannelSnapshot(data=data, grid=self.spec.grid, sigma2=sigma2, truth=truth)
        return GeneratedSample(snapshot=snapshot, noise_seed=noise_seed)


def sample_paths(spec: DatasetSpec, rng: np.random.Generator) -> PathSet:
    """One random PathSet honoring the dataset's separation and cell capacity."""
    return SnapshotGenerator(spec).sample_paths(rng)
