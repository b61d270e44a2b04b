from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from channel.errors import InvalidInputError


@dataclass(frozen=True)
class SamplingGrid:
    '''
    Frequency/time sampling of a channel transfer-function snapshot.

    Samples sit at f_k = f0 + k * delta_f and t_l = t0 + l * delta_t.
    Leaving f0 unset places the band symmetrically around baseband (f0 = -B/2).
    '''
    n_freq: int
    n_time: int
    delta_f: float = 1.0
    delta_t: float = 1.0
    f0: Optional[float] = None
    t0: float = 0.0

    def __post_init__(self):
        if self.n_freq < 2 or self.n_time < 2:
            raise InvalidInputError(
                f"Grid needs at least 2x2 samples, got {self.n_freq}x{self.n_time}"
            )
        if not (self.delta_f > 0 and self.delta_t > 0):
            raise InvalidInputError(
                f"Sampling intervals must be positive, got delta_f={self.delta_f}, delta_t={self.delta_t}"
            )
        if self.f0 is None:
            object.__setattr__(self, 'f0', -self.bandwidth / 2)

    @property
    def bandwidth(self) -> float:
        return self.n_freq * self.delta_f

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_freq, self.n_time)

    @property
    def size(self) -> int:
        return self.n_freq * self.n_time

    def frequencies(self) -> np.ndarray:
        return self.f0 + np.arange(self.n_freq) * self.delta_f

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_time) * self.delta_t

    def freq_index(self) -> np.ndarray:
        """Normalized frequency positions f_k / delta_f."""
        return self.frequencies() / self.delta_f

    def time_index(self) -> np.ndarray:
        """Normalized time positions t_l / delta_t."""
        return self.times() / self.delta_t

    def to_dict(self) -> dict:
        return {
            'n_freq': self.n_freq,
            'n_time': self.n_time,
            'delta_f': self.delta_f,
            'delta_t': self.delta_t,
            'f0': self.f0,
            't0': self.t0,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'SamplingGrid':
        return cls(**data)


@dataclass(frozen=True, eq=False)
class PathSet:
    '''
    Specular paths as parallel arrays: complex weights, normalized delays
    and normalized Doppler shifts, both in [0, 1).

    Estimates that only locate paths (decoded network output) carry
    gammas = None until the weights are fitted.
    '''
    gammas: Optional[np.ndarray]
    taus: np.ndarray
    alphas: np.ndarray

    def __post_init__(self):
        taus = np.atleast_1d(np.asarray(self.taus, dtype=float))
        alphas = np.atleast_1d(np.asarray(self.alphas, dtype=float))
        object.__setattr__(self, 'taus', taus)
        object.__setattr__(self, 'alphas', alphas)

        if taus.ndim != 1 or taus.shape != alphas.shape:
            raise InvalidInputError(
                f"taus and alphas must be equal-length vectors, got {taus.shape} and {alphas.shape}"
            )
        if self.gammas is not None:
            gammas = np.atleast_1d(np.asarray(self.gammas, dtype=complex))
            if gammas.shape != taus.shape:
                raise InvalidInputError(
                    f"gammas has shape {gammas.shape}, expected {taus.shape}"
                )
            object.__setattr__(self, 'gammas', gammas)

        for name, values in (('tau', taus), ('alpha', alphas)):
            bad = ~((values >= 0) & (values < 1))
            if np.any(bad):
                raise InvalidInputError(
                    f"{name} values must lie in [0, 1), got {values[bad].tolist()}"
                )

    @property
    def count(self) -> int:
        return len(self.taus)

    def __len__(self) -> int:
        return self.count

    @property
    def has_weights(self) -> bool:
        return self.gammas is not None

    @classmethod
    def empty(cls) -> 'PathSet':
        return cls(np.zeros(0, dtype=complex), np.zeros(0), np.zeros(0))

    def with_gammas(self, gammas: np.ndarray) -> 'PathSet':
        return PathSet(gammas, self.taus, self.alphas)

    def sorted(self) -> 'PathSet':
        order = np.lexsort((self.alphas, self.taus))
        gammas = None if self.gammas is None else self.gammas[order]
        return PathSet(gammas, self.taus[order], self.alphas[order])


@dataclass(frozen=True, eq=False)
class ChannelSnapshot:
    """One observation Y (or noiseless S) on its sampling grid."""
    data: np.ndarray
    grid: SamplingGrid
    sigma2: Optional[float] = None
    truth: Optional[PathSet] = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if not np.iscomplexobj(data):
            data = data.astype(complex)
        object.__setattr__(self, 'data', data)
        if data.shape != self.grid.shape:
            raise InvalidInputError(
                f"Snapshot has shape {data.shape}, grid expects {self.grid.shape}"
            )
        if self.sigma2 is not None and self.sigma2 < 0:
            raise InvalidInputError(f"Noise variance must be >= 0, got {self.sigma2}")

    @property
    def snr_db(self) -> Optional[float]:
        """SNR of the snapshot, when its truth and noise variance are known."""
        if self.truth is None or not self.sigma2:
            return None
        # Local import, model depends on this module.
        from channel.model import snr_db, synthesize
        return snr_db(synthesize(self.truth, self.grid), self.sigma2)
