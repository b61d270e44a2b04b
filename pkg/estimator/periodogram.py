'''
Grid-limited baseline: zero-padded periodogram peak search with the
model order chosen by the efficient detection criterion (EDC).
'''
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from channel.errors import InvalidInputError
from channel.model import steering_matrix
from channel.state import ChannelSnapshot, PathSet
from estimator.base import BaseEstimator, Method
from estimator.likelihood import PARAMS_PER_PATH, blue_weights
from network.preprocess import spectral_transform
from network.windows import WindowName, make_window

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PeriodogramConfig:
    oversample: int = 4
    window: WindowName = WindowName.RECTANGULAR
    # RSS never drops below rss_floor * ||y||^2 in the EDC.
    rss_floor: float = 1e-12

    def __post_init__(self):
        if not (isinstance(self.oversample, (int, np.integer)) and self.oversample >= 1):
            raise InvalidInputError(f"oversample must be an integer >= 1, got {self.oversample}")
        if not self.rss_floor > 0:
            raise InvalidInputError(f"rss_floor must be positive, got {self.rss_floor}")


def periodogram(observation: ChannelSnapshot, config: PeriodogramConfig = PeriodogramConfig()) -> np.ndarray:
    """|2D-DFT|^2 of the tapered snapshot, zero-padded to (O * n_freq, O * n_time)."""
    n_freq, n_time = observation.grid.shape
    taper = np.outer(make_window(config.window, n_freq), make_window(config.window, n_time))
    spectrum = spectral_transform(taper * observation.data, config.oversample * n_freq, config.oversample * n_time)
    return np.abs(spectrum) ** 2


def find_peaks(power: np.ndarray, count: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    '''
    Strict local maxima of a 2D map over the 3x3 neighbourhood, with
    wrap-around at the edges. Ranked by power, ties by flat index.
    '''
    is_peak = np.ones(power.shape, dtype=bool)
    for shift in [(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)]:
        is_peak &= power > np.roll(power, shift, axis=(0, 1))
    flat = np.flatnonzero(is_peak)
    values = power.ravel()[flat]
    ranked = flat[np.lexsort((flat, -values))]
    if count is not None:
        ranked = ranked[:count]
    return np.unravel_index(ranked, power.shape)


def ranked_peaks(observation: ChannelSnapshot, count: int, config: PeriodogramConfig = PeriodogramConfig()) -> Tuple[np.ndarray, np.ndarray]:
    """Normalized (taus, alphas) of the `count` strongest periodogram peaks."""
    power = periodogram(observation, config)
    rows, cols = find_peaks(power, count)
    return rows / power.shape[0], cols / power.shape[1]


def periodogram_peak_search(observation: ChannelSnapshot, n_paths: int, config: PeriodogramConfig = PeriodogramConfig()) -> PathSet:
    '''
    On-grid estimates of the n_paths strongest peaks with BLUE weights.
    Fewer local maxima than requested returns all of them with a warning.
    '''
    if n_paths < 1:
        raise InvalidInputError(f"Number of paths must be >= 1, got {n_paths}")
    taus, alphas = ranked_peaks(observation, n_paths, config)
    if len(taus) < n_paths:
        logger.warning("Periodogram has %d local maxima, %d requested", len(taus), n_paths)
    return PathSet(blue_weights(observation, taus, alphas, strict=False), taus, alphas)


def edc_penalty(n_paths, n_samples: int) -> np.ndarray:
    """p * d * sqrt(2M ln ln 2M) with d = 4 real parameters per path."""
    n_real = 2 * n_samples
    return np.asarray(n_paths) * PARAMS_PER_PATH * np.sqrt(n_real * np.log(np.log(n_real)))


def edc_scores(
    observation: ChannelSnapshot,
    p_max: int,
    config: PeriodogramConfig = PeriodogramConfig(),
    peaks: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> np.ndarray:
    '''
    EDC(p) for p = 0..p_max over the nested models built from the ranked
    peak list. Orders beyond the number of peaks score +inf.
    '''
    if p_max < 1:
        raise InvalidInputError(f"p_max must be >= 1, got {p_max}")
    taus, alphas = peaks if peaks is not None else ranked_peaks(observation, p_max, config)
    y = np.asarray(observation.data, dtype=complex).ravel()
    n_samples = y.size
    n_real = 2 * n_samples
    floor = max(config.rss_floor * float(np.vdot(y, y).real), np.finfo(float).tiny)

    scores = np.full(p_max + 1, np.inf)
    for p in range(min(p_max, len(taus)) + 1):
        residual = y
        if p:
            gammas = blue_weights(observation, taus[:p], alphas[:p], strict=False)
            residual = y - steering_matrix(taus[:p], alphas[:p], observation.grid) @ gammas
        rss = max(float(np.vdot(residual, residual).real), floor)
        scores[p] = n_real * np.log(rss / n_real) + edc_penalty(p, n_samples)
    return scores


def edc_model_order(observation: ChannelSnapshot, p_max: int, config: PeriodogramConfig = PeriodogramConfig()) -> int:
    # argmin keeps the first, i.e. smallest, order on ties
    return int(np.argmin(edc_scores(observation, p_max, config)))


class PeriodogramEstimator(BaseEstimator):
    method = Method.PERIODOGRAM

    def __init__(self, p_max: int = 20, config: PeriodogramConfig = PeriodogramConfig(), **kwargs):
        super().__init__(**kwargs)
        self.p_max = p_max
        self.config = config

    def _estimate(self, snapshot: ChannelSnapshot) -> Tuple[PathSet, dict]:
        peaks = ranked_peaks(snapshot, self.p_max, self.config)
        scores = edc_scores(snapshot, self.p_max, self.config, peaks)
        p_hat = int(np.argmin(scores))
        taus, alphas = peaks[0][:p_hat], peaks[1][:p_hat]
        gammas = blue_weights(snapshot, taus, alphas, strict=False)
        diagnostics = {
            'edc_scores': scores,
            'peaks_found': len(peaks[0]),
            'shortfall': max(self.p_max - len(peaks[0]), 0),
        }
        return PathSet(gammas, taus, alphas), diagnostics
