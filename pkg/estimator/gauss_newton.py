import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.linalg

from channel.errors import InvalidInputError
from channel.state import ChannelSnapshot
from estimator.base import EstimationResult, Method
from estimator.likelihood import (
    blue_weights,
    estimate_noise_variance,
    jacobian_and_fisher,
    nll,
    pack_theta,
    theta_to_paths,
)

logger = logging.getLogger(__name__)

DIAGNOSTICS_HEADER = ('iteration', 'nll', 'step_size', 'z_norm')


@dataclass(frozen=True)
class RefineConfig:
    max_iters: int = 10
    initial_step: float = 1.0
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    max_backtracks: int = 30
    tol: float = 1e-12
    # Levenberg ridge lambda * diag(F), only engaged when F is ill-conditioned.
    ridge_initial: float = 1e-6
    ridge_growth: float = 10.0
    ridge_shrink: float = 0.1
    ridge_max: float = 1e6
    max_condition: float = 1e12

    def __post_init__(self):
        values = {
            'max_iters': self.max_iters,
            'initial_step': self.initial_step,
            'shrink': self.shrink,
            'sufficient_decrease': self.sufficient_decrease,
            'max_backtracks': self.max_backtracks,
            'tol': self.tol,
            'ridge_initial': self.ridge_initial,
            'ridge_growth': self.ridge_growth,
            'ridge_shrink': self.ridge_shrink,
            'ridge_max': self.ridge_max,
            'max_condition': self.max_condition,
        }
        bad = [name for name, value in values.items() if not value > 0]
        if bad:
            raise InvalidInputError(f"Refinement settings must be positive: {bad}")
        if not self.shrink < 1:
            raise InvalidInputError(f"shrink must be < 1, got {self.shrink}")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    nll: float
    step_size: float
    z_norm: float


@dataclass
class RefinementDiagnostics:
    '''
    Trace of one refinement. Row 0 is the initial state; every further
    row is an accepted step.
    '''
    records: List[IterationRecord] = field(default_factory=list)
    sigma2: float = float('nan')
    converged: bool = False
    refined: bool = True
    reason: str = ''

    @property
    def iterations(self) -> int:
        return max(len(self.records) - 1, 0)

    @property
    def nll_trace(self) -> np.ndarray:
        return np.array([record.nll for record in self.records])

    def rows(self) -> List[Tuple[int, float, float, float]]:
        return [(r.iteration, r.nll, r.step_size, r.z_norm) for r in self.records]

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with path.open('w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(DIAGNOSTICS_HEADER)
            writer.writerows(self.rows())
        return path


class _RidgeSolver:
    """Solves F z = J, adding lambda * diag(F) while F is ill-conditioned."""
    def __init__(self, config: RefineConfig):
        self.config = config
        self.ridge = 0.0

    def solve(self, F: np.ndarray, J: np.ndarray) -> Optional[np.ndarray]:
        config = self.config
        diagonal = np.diag(np.diag(F))
        while True:
            system = F + self.ridge * diagonal
            try:
                if not np.linalg.cond(system) <= config.max_condition:
                    raise np.linalg.LinAlgError("ill-conditioned")
                factor = scipy.linalg.cho_factor(system)
                return scipy.linalg.cho_solve(factor, J)
            except np.linalg.LinAlgError:
                self.ridge = config.ridge_initial if self.ridge == 0 else self.ridge * config.ridge_growth
                if self.ridge > config.ridge_max:
                    return None
                logger.debug("Fisher matrix ill-conditioned, ridge raised to %.3g", self.ridge)

    def relax(self):
        self.ridge *= self.config.ridge_shrink
        if self.ridge < self.config.ridge_initial:
            self.ridge = 0.0


def gauss_newton_refine(
    init: EstimationResult,
    observation: ChannelSnapshot,
    sigma2: Optional[float] = None,
    config: RefineConfig = RefineConfig(),
    method: Optional[Method] = None,
) -> EstimationResult:
    '''
    Fisher-scoring refinement of an initial estimate:

        theta <- theta - eps * z,   (F + lambda diag F) z = J

    with a backtracking step eps and tau, alpha wrapped into [0, 1) after
    every step. Accepted steps never increase the nll.

    Missing initial weights are fitted by BLUE; a missing sigma2 falls back
    to observation.sigma2 and then to the residual power after BLUE.
    '''
    start = time.perf_counter()
    paths = init.paths
    if paths.count < 1:
        raise InvalidInputError("Refinement needs at least one initial path")
    if paths.gammas is None:
        paths = paths.with_gammas(blue_weights(observation, paths.taus, paths.alphas, strict=False))
    if sigma2 is None and observation.sigma2:
        sigma2 = observation.sigma2
    if sigma2 is None or sigma2 == 0:
        sigma2 = estimate_noise_variance(observation, paths.taus, paths.alphas)

    grid = observation.grid
    theta = pack_theta(paths)
    current = nll(theta, observation, sigma2)
    diagnostics = RefinementDiagnostics(sigma2=sigma2)
    diagnostics.records.append(IterationRecord(0, current, 0.0, float('nan')))
    solver = _RidgeSolver(config)

    for iteration in range(1, config.max_iters + 1):
        J, F = jacobian_and_fisher(theta, observation, sigma2)
        z = solver.solve(F, J)
        if z is None:
            logger.warning("Fisher matrix singular after maximum ridge, keeping the initial estimate")
            diagnostics.refined = False
            diagnostics.reason = 'singular-fisher'
            theta = pack_theta(paths)
            break
        z_norm = float(np.linalg.norm(z))
        if z_norm < config.tol:
            diagnostics.converged = True
            diagnostics.reason = 'tolerance'
            break

        slope = float(J @ z)
        step = config.initial_step
        accepted = None
        for _ in range(config.max_backtracks):
            candidate = pack_theta(theta_to_paths(theta - step * z, grid))
            value = nll(candidate, observation, sigma2)
            if not np.isfinite(value):
                diagnostics.reason = 'non-finite'
                break
            if value <= current - config.sufficient_decrease * step * slope:
                accepted = (candidate, value)
                break
            step *= config.shrink
        if diagnostics.reason == 'non-finite':
            logger.warning("Non-finite nll at iteration %d, keeping the last good estimate", iteration)
            break
        if accepted is None:
            diagnostics.converged = True
            diagnostics.reason = 'no-decrease'
            break

        theta, current = accepted
        solver.relax()
        diagnostics.records.append(IterationRecord(iteration, current, step, z_norm))
    else:
        diagnostics.reason = 'max-iters'

    refined = theta_to_paths(theta, grid)
    elapsed = time.perf_counter() - start
    return EstimationResult(
        paths = refined,
        method = method or init.method,
        wall_time = init.wall_time + elapsed,
        diagnostics = {**init.diagnostics, 'refinement': diagnostics},
    )
