import numpy as np
import pytest

from bench.matching import wrapped_difference
from channel.errors import InvalidInputError
from channel.model import add_noise, synthesize
from channel.state import ChannelSnapshot, PathSet, SamplingGrid
from estimator.periodogram import (
    PeriodogramConfig,
    PeriodogramEstimator,
    edc_model_order,
    edc_penalty,
    edc_scores,
    find_peaks,
    periodogram,
    periodogram_peak_search,
)

GRID = SamplingGrid(16, 16)
FINE = 4 * 16


def observe(paths, sigma2=0.0, seed=0, grid=GRID):
    data = add_noise(synthesize(paths, grid), sigma2, seed)
    return ChannelSnapshot(data, grid, sigma2=sigma2 or None, truth=paths)


def test_config_validation():
    with pytest.raises(InvalidInputError):
        PeriodogramConfig(oversample=0)
    with pytest.raises(InvalidInputError):
        PeriodogramConfig(rss_floor=0.0)


def test_periodogram_shape_and_peak():
    power = periodogram(observe(PathSet([1.0], [0.25], [0.5])))
    assert power.shape == (FINE, FINE)
    assert np.unravel_index(np.argmax(power), power.shape) == (16, 32)
    assert power.max() == pytest.approx(256.0 ** 2)


def test_on_bin_paths_are_recovered_exactly():
    truth = PathSet([1.0, -0.5j], [3 / 16, 11 / 16], [7 / 16, 1 / 16])
    estimate = periodogram_peak_search(observe(truth), 2)
    order = np.argsort(estimate.taus)
    np.testing.assert_array_equal(estimate.taus[order], truth.taus)
    np.testing.assert_array_equal(estimate.alphas[order], truth.alphas)
    np.testing.assert_allclose(estimate.gammas[order], truth.gammas, atol=1e-12)


def test_error_is_within_half_a_fine_bin():
    rng = np.random.default_rng(0)
    for tau, alpha in rng.random((50, 2)):
        estimate = periodogram_peak_search(observe(PathSet([1.0], [tau], [alpha])), 1)
        assert abs(wrapped_difference(estimate.taus[0], tau)) <= 0.5 / FINE + 1e-12
        assert abs(wrapped_difference(estimate.alphas[0], alpha)) <= 0.5 / FINE + 1e-12
        np.testing.assert_allclose(estimate.taus * FINE, np.round(estimate.taus * FINE), atol=1e-9)


def test_peaks_are_strict_with_wrap_around():
    power = np.zeros((6, 6))
    power[0, 0] = 5.0
    power[5, 5] = 4.0
    power[3, 3] = 2.0
    rows, cols = find_peaks(power)
    assert list(zip(rows, cols)) == [(0, 0), (3, 3)]

    assert find_peaks(np.ones((4, 4)))[0].size == 0

    ties = np.zeros((6, 6))
    ties[3, 3] = ties[1, 1] = 1.0
    rows, cols = find_peaks(ties)
    assert list(zip(rows, cols)) == [(1, 1), (3, 3)]
    assert find_peaks(ties, count=1)[0].tolist() == [1]


def test_penalty_grows_with_order():
    penalties = edc_penalty(np.arange(5), 256)
    assert penalties[0] == 0
    assert np.all(np.diff(penalties) > 0)
    assert penalties[1] == pytest.approx(4 * np.sqrt(512 * np.log(np.log(512))))


def test_edc_on_noiseless_single_path():
    observed = observe(PathSet([1.0], [5 / 16], [9 / 16]))
    assert edc_model_order(observed, p_max=5) == 1
    scores = edc_scores(observed, 5)
    assert scores.shape == (6,)
    assert np.argmin(scores) == 1
    with pytest.raises(InvalidInputError):
        edc_scores(observed, 0)


def test_estimator_reports_diagnostics():
    result = PeriodogramEstimator(p_max=4).estimate(observe(PathSet([1.0], [5 / 16], [9 / 16])))
    assert result.p_hat == 1
    assert result.diagnostics['peaks_found'] <= 4
    assert result.diagnostics['shortfall'] == 4 - result.diagnostics['peaks_found']


@pytest.mark.slow
def test_off_grid_error_floor():
    rng = np.random.default_rng(1)
    errors = []
    for tau, alpha in rng.random((500, 2)):
        estimate = periodogram_peak_search(observe(PathSet([1.0], [tau], [alpha])), 1)
        errors.append(wrapped_difference(estimate.taus[0], tau) ** 2)
    assert np.mean(errors) == pytest.approx((1 / FINE) ** 2 / 12, rel=0.2)


def sigma2_at(paths, snr, grid=GRID):
    power = np.mean(np.abs(synthesize(paths, grid)) ** 2)
    return power / 10 ** (snr / 10)


@pytest.mark.slow
def test_edc_is_consistent_at_high_snr():
    rng = np.random.default_rng(2)
    gammas = [1.0, 0.8 * np.exp(1j), 0.6j]
    correct = 0
    for seed in range(200):
        # Separated paths, each pushed off the fine grid by a random fraction of a bin.
        jitter = rng.random((2, 3)) / FINE
        truth = PathSet(gammas, np.array([0.15, 0.5, 0.8]) + jitter[0], np.array([0.7, 0.2, 0.45]) + jitter[1])
        correct += edc_model_order(observe(truth, sigma2_at(truth, 30.0), seed), p_max=6) == 3
    assert correct / 200 >= 0.95


@pytest.mark.slow
def test_edc_underestimates_with_a_weak_path_at_low_snr():
    weak = 10 ** (-25 / 20)
    truth = PathSet([1.0, weak * np.exp(0.5j)], [0.3, 0.7], [0.6, 0.15])
    sigma2 = sigma2_at(truth, 0.0)
    errors = [
        PeriodogramEstimator(p_max=6).estimate(observe(truth, sigma2, seed)).p_hat - truth.count
        for seed in range(200)
    ]
    assert np.mean(errors) < 0
