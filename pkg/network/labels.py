'''
Cell-relative label encoding of path parameters.

The normalized (tau, alpha) square is split into I x J cells. Each cell holds
up to C slots of (mu, dtau, dalpha): mu flags an occupied slot, dtau and
dalpha are the path's coordinates inside the cell (0.5 is the centroid).
Occupied slots come first, ordered by descending |gamma|.

Layout of eta: [i, j, 3 * c + k] with k = 0 (mu), 1 (dtau), 2 (dalpha),
i.e. cell-major then slot-major.
'''
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from channel.errors import CapacityError, InvalidInputError
from channel.state import PathSet

# Largest offset below 1; points on an upper cell edge tie into the lower cell.
MAX_OFFSET = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class CellGrid:
    n_delay_cells: int = 8      # I
    n_doppler_cells: int = 8    # J
    capacity: int = 3           # C, paths per cell

    def __post_init__(self):
        if self.n_delay_cells < 1 or self.n_doppler_cells < 1:
            raise InvalidInputError(
                f"Cell grid needs at least one cell per axis, got "
                f"{self.n_delay_cells}x{self.n_doppler_cells}"
            )
        if self.capacity < 1:
            raise InvalidInputError(f"Cell capacity must be >= 1, got {self.capacity}")

    @property
    def cell_width_tau(self) -> float:
        return 1.0 / self.n_delay_cells

    @property
    def cell_width_alpha(self) -> float:
        return 1.0 / self.n_doppler_cells

    @property
    def n_slots(self) -> int:
        return self.n_delay_cells * self.n_doppler_cells * self.capacity

    @property
    def eta_shape(self) -> Tuple[int, int, int]:
        return (self.n_delay_cells, self.n_doppler_cells, 3 * self.capacity)

    @property
    def centroids(self) -> np.ndarray:
        """(I, J, 2) array of cell centers x_ij."""
        tau = (np.arange(self.n_delay_cells) + 0.5) / self.n_delay_cells
        alpha = (np.arange(self.n_doppler_cells) + 0.5) / self.n_doppler_cells
        grid_tau, grid_alpha = np.meshgrid(tau, alpha, indexing='ij')
        return np.stack([grid_tau, grid_alpha], axis=-1)

    def cell_bounds(self, i: int, j: int) -> Tuple[float, float, float, float]:
        """(tau_left, tau_right, alpha_left, alpha_right) of cell (i, j)."""
        return (
            i / self.n_delay_cells,
            (i + 1) / self.n_delay_cells,
            j / self.n_doppler_cells,
            (j + 1) / self.n_doppler_cells,
        )


@dataclass(frozen=True, eq=False)
class LabelTensor:
    eta: np.ndarray     # (I, J, 3C)
    rho: np.ndarray     # (p_max,) one-hot model order

    @property
    def model_order(self) -> int:
        return int(np.argmax(self.rho)) + 1

    def validate(self, grid: CellGrid) -> None:
        if self.eta.shape != grid.eta_shape:
            raise InvalidInputError(f"eta has shape {self.eta.shape}, expected {grid.eta_shape}")
        slots = self.eta.reshape(-1, 3)
        mu = slots[:, 0]
        if not np.all((mu == 0) | (mu == 1)):
            raise InvalidInputError("Ground-truth mu must be 0 or 1")
        if np.any(slots[mu == 0, 1:] != 0):
            raise InvalidInputError("Unoccupied slots must carry zero offsets")
        if np.sum(self.rho) != 1 or not np.all((self.rho == 0) | (self.rho == 1)):
            raise InvalidInputError("rho must be one-hot")


class DecodePolicy(Enum):
    """How decoded slots are selected from the network's detection scores."""
    TOP_K = 'top-k'             # the P_hat best slots, P_hat from the order head
    THRESHOLD = 'threshold'     # every slot scoring above 0.5

    @classmethod
    def from_label(cls, label: str) -> Optional['DecodePolicy']:
        for policy in cls:
            if policy.value == label:
                return policy
        return None


def assign_cell(tau: float, alpha: float, grid: CellGrid) -> Tuple[int, int]:
    '''
    Cell whose centroid is closest in l2 distance.

    np.argmin returns the first minimum of the row-major distance map,
    so ties resolve to the smaller i, then the smaller j.
    '''
    if not (0 <= tau < 1 and 0 <= alpha < 1):
        raise InvalidInputError(f"Parameters must lie in [0, 1), got tau={tau}, alpha={alpha}")

    centroids = grid.centroids
    distance = (centroids[..., 0] - tau) ** 2 + (centroids[..., 1] - alpha) ** 2
    flat = int(np.argmin(distance))
    i, j = divmod(flat, grid.n_doppler_cells)
    return i, j


def encode_labels(paths: PathSet, grid: CellGrid, p_max: int) -> LabelTensor:
    P = paths.count
    if P < 1 or P > p_max:
        raise InvalidInputError(f"Model order must lie in [1, {p_max}], got {P}")

    magnitudes = np.abs(paths.gammas) if paths.has_weights else np.ones(P)
    # Descending |gamma|, ties by tau then alpha.
    order = np.lexsort((paths.alphas, paths.taus, -magnitudes))

    slots = np.zeros((grid.n_delay_cells, grid.n_doppler_cells, grid.capacity, 3))
    filled = np.zeros((grid.n_delay_cells, grid.n_doppler_cells), dtype=int)
    for p in order:
        tau, alpha = paths.taus[p], paths.alphas[p]
        i, j = assign_cell(tau, alpha, grid)
        c = filled[i, j]
        if c >= grid.capacity:
            raise CapacityError(
                f"Cell ({i}, {j}) would hold more than {grid.capacity} paths",
                cell = (i, j),
            )
        slots[i, j, c] = (
            1.0,
            min(tau * grid.n_delay_cells - i, MAX_OFFSET),
            min(alpha * grid.n_doppler_cells - j, MAX_OFFSET),
        )
        filled[i, j] += 1

    rho = np.zeros(p_max)
    rho[P - 1] = 1.0
    return LabelTensor(eta=slots.reshape(grid.eta_shape), rho=rho)


def decode_labels(
    eta_pred: np.ndarray,
    rho_pred: np.ndarray,
    grid: CellGrid,
    policy: DecodePolicy = DecodePolicy.TOP_K,
    threshold: float = 0.5,
) -> PathSet:
    '''
    Turn raw network outputs back into delay/Doppler estimates.

    Slots are ranked by sigmoid(mu_hat); under TOP_K the model order
    P_hat = 1 + argmax(rho) decides how many are kept. The result carries
    no weights.
    '''
    eta = np.asarray(eta_pred, dtype=float)
    if eta.size != grid.n_slots * 3:
        raise InvalidInputError(f"eta has {eta.size} entries, expected {grid.n_slots * 3}")
    slots = eta.reshape(grid.n_delay_cells, grid.n_doppler_cells, grid.capacity, 3)
    scores = expit(slots[..., 0]).ravel()

    if policy == DecodePolicy.TOP_K:
        p_hat = int(np.argmax(np.asarray(rho_pred))) + 1
        selected = np.argsort(-scores, kind='stable')[:p_hat]
    else:
        selected = np.flatnonzero(scores > threshold)
        if selected.size == 0:
            selected = np.array([int(np.argmax(scores))])

    i, j, c = np.unravel_index(selected, (grid.n_delay_cells, grid.n_doppler_cells, grid.capacity))
    dtau = np.clip(slots[i, j, c, 1], 0.0, 1.0)
    dalpha = np.clip(slots[i, j, c, 2], 0.0, 1.0)
    taus = np.mod((i + dtau) / grid.n_delay_cells, 1.0)
    alphas = np.mod((j + dalpha) / grid.n_doppler_cells, 1.0)
    return PathSet(None, taus, alphas)
