import numpy as np
import pytest

from channel.errors import InvalidInputError, UndefinedSNRError
from channel.model import add_noise, snr_db, steering_matrix, synthesize, wrap_parameters
from channel.state import ChannelSnapshot, PathSet, SamplingGrid

GRID8 = SamplingGrid(8, 8)


def naive_synthesize(gammas, taus, alphas, grid):
    S = np.zeros(grid.shape, dtype=complex)
    for k, f in enumerate(grid.frequencies()):
        for l, t in enumerate(grid.times()):
            for g, tau, alpha in zip(gammas, taus, alphas):
                S[k, l] += g * np.exp(-2j * np.pi * f / grid.delta_f * tau) * np.exp(2j * np.pi * t / grid.delta_t * alpha)
    return S


def random_paths(rng, n_paths):
    gammas = rng.uniform(0.1, 1, n_paths) * np.exp(2j * np.pi * rng.random(n_paths))
    return PathSet(gammas, rng.random(n_paths), rng.random(n_paths))


def test_grid_defaults():
    grid = SamplingGrid(64, 32, delta_f=2.0)
    assert grid.f0 == -64.0
    assert grid.t0 == 0.0
    assert grid.bandwidth == 128.0
    np.testing.assert_allclose(grid.freq_index(), np.arange(64) - 32)


@pytest.mark.parametrize("kwargs", [
    dict(n_freq=1, n_time=8),
    dict(n_freq=8, n_time=8, delta_t=0.0),
])
def test_grid_rejects_invalid(kwargs):
    with pytest.raises(InvalidInputError):
        SamplingGrid(**kwargs)


def test_pathset_validation():
    with pytest.raises(InvalidInputError):
        PathSet(np.ones(2), [0.1, 1.0], [0.2, 0.3])
    with pytest.raises(InvalidInputError):
        PathSet(np.ones(3), [0.1, 0.2], [0.2, 0.3])


def test_zero_parameters_give_all_ones():
    S = synthesize(PathSet([1.0], [0.0], [0.0]), SamplingGrid(5, 7))
    np.testing.assert_allclose(S, np.ones((5, 7)))


def test_empty_pathset_is_zero():
    S = synthesize(PathSet.empty(), GRID8)
    assert S.shape == (8, 8)
    assert not np.any(S)


def test_two_path_example_matches_naive_loop():
    paths = PathSet([1, 0.5j], [0.25, 0.75], [0.1, 0.6])
    np.testing.assert_allclose(synthesize(paths, GRID8), naive_synthesize(paths.gammas, paths.taus, paths.alphas, GRID8), atol=1e-12)


def test_synthesize_matches_naive_oracle_on_random_cases():
    rng = np.random.default_rng(1)
    for _ in range(100):
        paths = random_paths(rng, int(rng.integers(1, 6)))
        S = synthesize(paths, GRID8)
        oracle = naive_synthesize(paths.gammas, paths.taus, paths.alphas, GRID8)
        assert np.linalg.norm(S - oracle) <= 1e-12 * np.linalg.norm(oracle)


def test_linearity_and_energy():
    rng = np.random.default_rng(2)
    paths = random_paths(rng, 3)
    c = 0.3 - 1.2j
    np.testing.assert_allclose(synthesize(paths.with_gammas(c * paths.gammas), GRID8), c * synthesize(paths, GRID8), atol=1e-12)

    single = PathSet([0.7j], [0.31], [0.77])
    energy = np.sum(np.abs(synthesize(single, GRID8)) ** 2)
    assert energy == pytest.approx(0.49 * 64, rel=1e-12)


def test_integer_shift_leaves_synthesis_unchanged():
    paths = PathSet([1 + 1j], [0.3], [0.4])
    S = synthesize(paths, GRID8)
    A = steering_matrix([1.3], [0.4], GRID8) @ paths.gammas
    B = steering_matrix([0.3], [2.4], GRID8) @ paths.gammas
    np.testing.assert_allclose(A.reshape(GRID8.shape), S, atol=1e-11)
    np.testing.assert_allclose(B.reshape(GRID8.shape), S, atol=1e-11)


def test_wrap_parameters_compensates_fractional_offset():
    grid = SamplingGrid(7, 5, t0=0.25)
    gammas, taus, alphas = np.array([0.5 + 0.2j, 1.0]), np.array([1.3, -0.2]), np.array([-0.6, 2.1])
    wrapped = wrap_parameters(gammas, taus, alphas, grid)
    assert np.all((wrapped[1] >= 0) & (wrapped[1] < 1))
    assert np.all((wrapped[2] >= 0) & (wrapped[2] < 1))
    before = steering_matrix(taus, alphas, grid) @ gammas
    after = steering_matrix(wrapped[1], wrapped[2], grid) @ wrapped[0]
    np.testing.assert_allclose(after, before, atol=1e-11)


def test_wrap_parameters_never_returns_one():
    _, taus, _ = wrap_parameters([1.0], [-1e-18], [0.5], GRID8)
    assert 0 <= taus[0] < 1


def test_steering_matrix_consistency():
    rng = np.random.default_rng(3)
    grid = SamplingGrid(16, 16)
    paths = random_paths(rng, 3)
    A = steering_matrix(paths.taus, paths.alphas, grid)
    assert A.shape == (256, 3)
    np.testing.assert_allclose(np.linalg.norm(A, axis=0), np.full(3, 16.0))
    np.testing.assert_allclose((A @ paths.gammas).reshape(grid.shape), synthesize(paths, grid), atol=1e-12)
    np.testing.assert_allclose(steering_matrix([0.0], [0.0], grid)[:, 0], np.ones(256))


def test_add_noise_contract():
    signal = np.ones((64, 64), dtype=complex)
    assert np.array_equal(add_noise(signal, 0.0, seed=1), signal)

    noisy = add_noise(np.zeros((64, 64), dtype=complex), 1.0, seed=7)
    assert 0.95 <= np.mean(np.abs(noisy) ** 2) <= 1.05
    assert np.array_equal(noisy, add_noise(np.zeros((64, 64), dtype=complex), 1.0, seed=7))
    with pytest.raises(InvalidInputError):
        add_noise(signal, -1.0, seed=1)


def test_snr_examples():
    ones = np.ones((8, 8))
    assert snr_db(ones, 1.0) == pytest.approx(0.0)
    assert snr_db(ones, 0.1) == pytest.approx(10.0)
    single = synthesize(PathSet([np.exp(0.4j)], [0.123], [0.987]), GRID8)
    assert snr_db(single, 1.0) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(UndefinedSNRError):
        snr_db(ones, 0.0)


def test_snapshot_reports_snr():
    truth = PathSet([1.0], [0.2], [0.3])
    snapshot = ChannelSnapshot(synthesize(truth, GRID8), GRID8, sigma2=0.01, truth=truth)
    assert snapshot.snr_db == pytest.approx(20.0)
    with pytest.raises(InvalidInputError):
        ChannelSnapshot(np.zeros((4, 4)), GRID8)
