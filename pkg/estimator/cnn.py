import logging
from typing import Optional, Tuple

from channel.errors import InvalidInputError
from channel.state import ChannelSnapshot, PathSet
from estimator.base import BaseEstimator, EstimationResult, Method
from estimator.gauss_newton import RefineConfig, gauss_newton_refine
from estimator.likelihood import blue_weights
from network.labels import CellGrid, DecodePolicy, decode_labels
from network.model import predict
from network.preprocess import preprocess
from network.training import ModelWeights
from network.windows import WindowBank

logger = logging.getLogger(__name__)


class CNNEstimator(BaseEstimator):
    '''
    Network estimate: preprocess, forward pass, label decoding, then BLUE
    weights at the decoded delays and Doppler shifts.
    '''
    method = Method.CNN

    def __init__(
        self,
        weights: ModelWeights,
        bank: Optional[WindowBank] = None,
        policy: DecodePolicy = DecodePolicy.TOP_K,
        device: str = 'cpu',
        **kwargs,
    ):
        super().__init__(**kwargs)
        self.weights = weights
        self.bank = bank or WindowBank()
        self.policy = policy
        self.model = weights.build_model(device)

    @property
    def cell_grid(self) -> CellGrid:
        return self.weights.config.cell_grid

    def _estimate(self, snapshot: ChannelSnapshot) -> Tuple[PathSet, dict]:
        config = self.weights.config
        if snapshot.grid.shape != (config.n_freq, config.n_time):
            raise InvalidInputError(
                f"Snapshot grid {snapshot.grid.shape} does not match network input {(config.n_freq, config.n_time)}"
            )
        eta, rho = predict(self.model, preprocess(snapshot, self.bank).tensor)
        located = decode_labels(eta, rho, self.cell_grid, self.policy)
        logger.debug("Decoded %d paths (%s)", located.count, self.policy.value)
        # Two slots may decode onto one path, so the fit must tolerate rank loss.
        gammas = blue_weights(snapshot, located.taus, located.alphas, strict=False)
        return located.with_gammas(gammas), {'rho_logits': rho}


class RefinedCNNEstimator(BaseEstimator):
    method = Method.CNN_GN

    def __init__(
        self,
        weights: ModelWeights,
        bank: Optional[WindowBank] = None,
        refine_config: RefineConfig = RefineConfig(),
        policy: DecodePolicy = DecodePolicy.TOP_K,
        device: str = 'cpu',
        **kwargs,
    ):
        super().__init__(**kwargs)
        self.network = CNNEstimator(weights, bank, policy, device)
        self.refine_config = refine_config

    def _estimate(self, snapshot: ChannelSnapshot) -> Tuple[PathSet, dict]:
        init = self.network.estimate(snapshot)
        refined = gauss_newton_refine(init, snapshot, None, self.refine_config, method=self.method)
        return refined.paths, refined.diagnostics


def infer(
    snapshot: ChannelSnapshot,
    weights: ModelWeights,
    bank: Optional[WindowBank] = None,
    grid: Optional[CellGrid] = None,
    policy: DecodePolicy = DecodePolicy.TOP_K,
) -> EstimationResult:
    """One-off network estimate of a snapshot."""
    if grid is not None and grid != weights.config.cell_grid:
        raise InvalidInputError(f"Cell grid {grid} does not match the trained network's {weights.config.cell_grid}")
    return CNNEstimator(weights, bank, policy).estimate(snapshot)
