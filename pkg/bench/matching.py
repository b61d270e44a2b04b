from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from channel.state import PathSet

DEFAULT_GATE = 0.05


@dataclass(frozen=True)
class PathMatch:
    '''
    Pairing of estimated to true paths.
    pairs holds (estimate index, truth index); costs are the wrapped
    (tau, alpha) distances of those pairs.
    '''
    pairs: Tuple[Tuple[int, int], ...]
    costs: Tuple[float, ...]
    unmatched_estimates: Tuple[int, ...]
    unmatched_truth: Tuple[int, ...]
    total_cost: float

    @property
    def n_matched(self) -> int:
        return len(self.pairs)


def wrapped_difference(a, b) -> np.ndarray:
    """a - b on the unit circle, in [-0.5, 0.5)."""
    return np.mod(np.asarray(a) - np.asarray(b) + 0.5, 1.0) - 0.5


def distance_matrix(estimate: PathSet, truth: PathSet) -> np.ndarray:
    d_tau = wrapped_difference(estimate.taus[:, None], truth.taus[None, :])
    d_alpha = wrapped_difference(estimate.alphas[:, None], truth.alphas[None, :])
    return np.hypot(d_tau, d_alpha)


def match_paths(estimate: PathSet, truth: PathSet, gate: float = DEFAULT_GATE) -> PathMatch:
    '''
    Minimum-total-cost assignment between estimated and true paths under
    the wrap-around l2 metric; assigned pairs farther apart than gate are
    split back into unmatched estimates and unmatched truth.
    '''
    cost = distance_matrix(estimate, truth)
    if cost.size:
        rows, cols = linear_sum_assignment(cost)
    else:
        rows, cols = np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    total_cost = float(cost[rows, cols].sum())

    pairs: List[Tuple[int, int]] = []
    costs: List[float] = []
    for r, c in zip(rows, cols):
        if cost[r, c] <= gate:
            pairs.append((int(r), int(c)))
            costs.append(float(cost[r, c]))
    matched_estimates = {r for r, _ in pairs}
    matched_truth = {c for _, c in pairs}
    return PathMatch(
        pairs = tuple(pairs),
        costs = tuple(costs),
        unmatched_estimates = tuple(i for i in range(estimate.count) if i not in matched_estimates),
        unmatched_truth = tuple(i for i in range(truth.count) if i not in matched_truth),
        total_cost = total_cost,
    )
