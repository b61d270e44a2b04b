'''
Discrete signal model of a multipath channel snapshot.

Path p contributes gamma_p * exp(-2j pi f_k tau_p) * exp(2j pi t_l alpha_p),
with f_k, t_l in units of the sampling intervals so that tau and alpha are
normalized to [0, 1).
'''
from typing import Tuple

import numpy as np

from channel.errors import InvalidInputError, UndefinedSNRError
from channel.state import PathSet, SamplingGrid


def _as_parameters(taus, alphas) -> Tuple[np.ndarray, np.ndarray]:
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    if taus.ndim != 1 or taus.shape != alphas.shape:
        raise InvalidInputError(
            f"taus and alphas must be equal-length vectors, got {taus.shape} and {alphas.shape}"
        )
    if not (np.all(np.isfinite(taus)) and np.all(np.isfinite(alphas))):
        raise InvalidInputError("taus and alphas must be finite")
    return taus, alphas


def delay_phasors(taus: np.ndarray, grid: SamplingGrid) -> np.ndarray:
    """(n_freq, P) matrix of exp(-2j pi f_k tau_p)."""
    return np.exp(-2j * np.pi * np.outer(grid.freq_index(), taus))


def doppler_phasors(alphas: np.ndarray, grid: SamplingGrid) -> np.ndarray:
    """(n_time, P) matrix of exp(2j pi t_l alpha_p)."""
    return np.exp(2j * np.pi * np.outer(grid.time_index(), alphas))


def synthesize(paths: PathSet, grid: SamplingGrid) -> np.ndarray:
    '''
    Noiseless snapshot S of shape (n_freq, n_time).

    Each path is a rank-1 outer product of its delay and Doppler phasors,
    so the sum is a single (n_freq, P) @ (P, n_time) product.
    '''
    if paths.gammas is None:
        raise InvalidInputError("Cannot synthesize paths without complex weights")
    freq = delay_phasors(paths.taus, grid)
    time = doppler_phasors(paths.alphas, grid)
    return (freq * paths.gammas) @ time.T


def steering_matrix(taus, alphas, grid: SamplingGrid) -> np.ndarray:
    '''
    (n_freq * n_time, P) matrix whose column p is the row-major
    vectorization of the unit-weight snapshot of path p.
    '''
    taus, alphas = _as_parameters(taus, alphas)
    freq = delay_phasors(taus, grid)
    time = doppler_phasors(alphas, grid)
    return np.einsum('kp,lp->klp', freq, time).reshape(grid.size, len(taus))


def steering_derivatives(taus, alphas, grid: SamplingGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Columns of d(steering)/d(tau) and d(steering)/d(alpha)."""
    taus, alphas = _as_parameters(taus, alphas)
    columns = steering_matrix(taus, alphas, grid)
    freq = np.repeat(grid.freq_index(), grid.n_time)
    time = np.tile(grid.time_index(), grid.n_freq)
    d_tau = (-2j * np.pi * freq)[:, None] * columns
    d_alpha = (2j * np.pi * time)[:, None] * columns
    return d_tau, d_alpha


def wrap_parameters(gammas, taus, alphas, grid: SamplingGrid) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    '''
    Map tau and alpha into [0, 1) without changing the synthesized signal.

    An integer shift n of tau multiplies the delay phasor by
    exp(-2j pi f0/delta_f n), which is absorbed into gamma.
    '''
    gammas = np.asarray(gammas, dtype=complex)
    taus = np.asarray(taus, dtype=float)
    alphas = np.asarray(alphas, dtype=float)

    tau_shift, taus = _split_integer(taus)
    alpha_shift, alphas = _split_integer(alphas)
    f_offset = grid.f0 / grid.delta_f
    t_offset = grid.t0 / grid.delta_t
    gammas = gammas * np.exp(
        -2j * np.pi * f_offset * tau_shift + 2j * np.pi * t_offset * alpha_shift
    )
    return gammas, taus, alphas


def _split_integer(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    shift = np.floor(values)
    fraction = values - shift
    # Values a hair below an integer can round up to exactly 1.0.
    carry = fraction >= 1.0
    fraction[carry] -= 1.0
    shift[carry] += 1.0
    return shift, fraction


def add_noise(signal: np.ndarray, sigma2: float, seed: int) -> np.ndarray:
    '''
    Y = S + N with N circular complex Gaussian, E|N|^2 = sigma2
    (real and imaginary parts each sigma2 / 2). Reproducible per seed.
    '''
    if sigma2 < 0:
        raise InvalidInputError(f"Noise variance must be >= 0, got {sigma2}")
    signal = np.asarray(signal)
    if sigma2 == 0:
        return signal.copy()

    rng = np.random.default_rng(seed)
    scale = np.sqrt(sigma2 / 2)
    noise = scale * (rng.standard_normal(signal.shape) + 1j * rng.standard_normal(signal.shape))
    return signal + noise


def snr_db(signal: np.ndarray, sigma2: float) -> float:
    """Mean per-sample signal power over sigma2, in dB."""
    if sigma2 < 0:
        raise InvalidInputError(f"Noise variance must be >= 0, got {sigma2}")
    if sigma2 == 0:
        raise UndefinedSNRError("SNR is undefined for a noiseless observation (sigma2 = 0)")
    signal = np.asarray(signal)
    power = np.sum(np.abs(signal) ** 2) / signal.size
    return float(10 * np.log10(power / sigma2))
