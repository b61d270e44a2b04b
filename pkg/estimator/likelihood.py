'''
Gaussian likelihood of a snapshot and its derivatives.

The real parameter vector theta stacks (Re gamma_p, Im gamma_p, tau_p,
alpha_p) path by path, so theta.reshape(P, 4) recovers one row per path.
'''
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from channel.errors import DegenerateSystemError, InvalidInputError
from channel.model import steering_derivatives, steering_matrix, wrap_parameters
from channel.state import ChannelSnapshot, PathSet, SamplingGrid

PARAMS_PER_PATH = 4
PARAMETER_NAMES = ('gamma_re', 'gamma_im', 'tau', 'alpha')

RANK_TOLERANCE = 1e-10
MAX_FISHER_CONDITION = 1e13
NOISE_FLOOR = 1e-12


def pack_theta(paths: PathSet) -> np.ndarray:
    if paths.gammas is None:
        raise InvalidInputError("Cannot pack paths without complex weights")
    return np.column_stack([paths.gammas.real, paths.gammas.imag, paths.taus, paths.alphas]).ravel()


def unpack_theta(theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(gammas, taus, alphas) of theta. tau and alpha are not wrapped."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size % PARAMS_PER_PATH:
        raise InvalidInputError(f"theta must be a vector of length 4P, got shape {theta.shape}")
    rows = theta.reshape(-1, PARAMS_PER_PATH)
    return rows[:, 0] + 1j * rows[:, 1], rows[:, 2], rows[:, 3]


def theta_to_paths(theta: np.ndarray, grid: SamplingGrid) -> PathSet:
    """Wrap theta into [0, 1) (compensating the weights) and build a PathSet."""
    return PathSet(*wrap_parameters(*unpack_theta(theta), grid))


def _observation(observation: ChannelSnapshot) -> np.ndarray:
    return np.asarray(observation.data, dtype=complex).ravel()


def _check_sigma2(sigma2: float):
    if not sigma2 > 0:
        raise InvalidInputError(f"Noise variance must be > 0, got {sigma2}")


def _most_collinear_pair(columns: np.ndarray) -> Optional[Tuple[int, int]]:
    if columns.shape[1] < 2:
        return None
    norms = np.linalg.norm(columns, axis=0)
    norms[norms == 0] = 1.0
    unit = columns / norms
    coherence = np.abs(unit.conj().T @ unit)
    np.fill_diagonal(coherence, -1.0)
    i, j = np.unravel_index(np.argmax(coherence), coherence.shape)
    return (int(min(i, j)), int(max(i, j)))


def blue_weights(observation: ChannelSnapshot, taus, alphas, strict: bool = True) -> np.ndarray:
    '''
    Least-squares complex weights for fixed delays and Doppler shifts.

    strict=True raises DegenerateSystemError when the steering matrix is
    rank deficient; strict=False returns the minimum-norm solution instead.
    '''
    grid = observation.grid
    A = steering_matrix(taus, alphas, grid)
    if A.shape[1] == 0:
        return np.zeros(0, dtype=complex)
    if A.shape[1] > A.shape[0]:
        raise InvalidInputError(f"Cannot fit {A.shape[1]} paths to {A.shape[0]} samples")

    y = _observation(observation)
    singular_values = scipy.linalg.svdvals(A)
    degenerate = singular_values[-1] <= RANK_TOLERANCE * singular_values[0]
    if degenerate and strict:
        pair = _most_collinear_pair(A)
        raise DegenerateSystemError(
            f"Steering matrix is rank deficient; paths {pair} are indistinguishable",
            pair = pair,
        )
    gammas, *_ = scipy.linalg.lstsq(A, y, cond=RANK_TOLERANCE if degenerate else None)
    return gammas


def model_signal(theta: np.ndarray, grid: SamplingGrid) -> np.ndarray:
    """Row-major vectorized noiseless snapshot of theta."""
    gammas, taus, alphas = unpack_theta(theta)
    return steering_matrix(taus, alphas, grid) @ gammas


def nll(theta: np.ndarray, observation: ChannelSnapshot, sigma2: float) -> float:
    """(1 / sigma2) * ||Y - S(theta)||_F^2."""
    _check_sigma2(sigma2)
    residual = _observation(observation) - model_signal(theta, observation.grid)
    return float(np.vdot(residual, residual).real / sigma2)


def model_derivatives(theta: np.ndarray, grid: SamplingGrid) -> np.ndarray:
    '''
    D = d vec(S) / d theta, shape (n_freq * n_time, 4P), with columns
    ordered like theta: a_p, j a_p, gamma_p da_p/dtau, gamma_p da_p/dalpha.
    '''
    gammas, taus, alphas = unpack_theta(theta)
    A = steering_matrix(taus, alphas, grid)
    d_tau, d_alpha = steering_derivatives(taus, alphas, grid)
    D = np.stack([A, 1j * A, d_tau * gammas, d_alpha * gammas], axis=-1)
    return D.reshape(grid.size, -1)


def fisher_information(theta: np.ndarray, grid: SamplingGrid, sigma2: float) -> np.ndarray:
    _check_sigma2(sigma2)
    D = model_derivatives(theta, grid)
    return 2.0 / sigma2 * (D.conj().T @ D).real


def jacobian_and_fisher(theta: np.ndarray, observation: ChannelSnapshot, sigma2: float) -> Tuple[np.ndarray, np.ndarray]:
    '''
    Gradient J of nll and Fisher matrix F at theta:

        J = -(2 / sigma2) Re(D^H r),   F = (2 / sigma2) Re(D^H D)

    with r = vec(Y) - vec(S(theta)).
    '''
    _check_sigma2(sigma2)
    grid = observation.grid
    D = model_derivatives(theta, grid)
    gammas, taus, alphas = unpack_theta(theta)
    residual = _observation(observation) - steering_matrix(taus, alphas, grid) @ gammas
    J = -2.0 / sigma2 * (D.conj().T @ residual).real
    F = 2.0 / sigma2 * (D.conj().T @ D).real
    return J, F


def crb(paths: PathSet, grid: SamplingGrid, sigma2: float) -> np.ndarray:
    '''
    Cramer-Rao bounds: diagonal of the inverse Fisher matrix at the true
    parameters, ordered like theta. Delay and Doppler variances are in
    normalized units.
    '''
    theta = pack_theta(paths)
    F = fisher_information(theta, grid, sigma2)
    if F.size == 0:
        return np.zeros(0)
    try:
        condition = np.linalg.cond(F)
        if not condition < MAX_FISHER_CONDITION:
            raise np.linalg.LinAlgError(f"condition number {condition:.3g}")
        inverse = scipy.linalg.inv(F)
    except np.linalg.LinAlgError as error:
        pair = _most_collinear_pair(steering_matrix(paths.taus, paths.alphas, grid))
        raise DegenerateSystemError(f"Fisher matrix is singular ({error}); paths {pair} coincide", pair=pair)
    return np.diag(inverse).copy()


def estimate_noise_variance(observation: ChannelSnapshot, taus, alphas) -> float:
    '''
    Residual power per sample after the BLUE fit, floored at a tiny
    fraction of the observation power so that it stays positive.
    '''
    y = _observation(observation)
    gammas = blue_weights(observation, taus, alphas, strict=False)
    residual = y - steering_matrix(taus, alphas, observation.grid) @ gammas
    dof = max(y.size - len(gammas), 1)
    power = float(np.vdot(residual, residual).real / dof)
    floor = max(NOISE_FLOOR * float(np.mean(np.abs(y) ** 2)), np.finfo(float).tiny)
    return max(power, floor)
