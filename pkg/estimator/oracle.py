from typing import Tuple

from channel.errors import InvalidInputError
from channel.state import ChannelSnapshot, PathSet
from estimator.base import BaseEstimator, EstimationResult, Method
from estimator.gauss_newton import RefineConfig, gauss_newton_refine


class OracleInitEstimator(BaseEstimator):
    '''
    Gauss-Newton started at the true parameters. Only usable on synthetic
    snapshots; serves as the maximum-likelihood reference curve.
    '''
    method = Method.GN_ORACLE_INIT

    def __init__(self, refine_config: RefineConfig = RefineConfig(), **kwargs):
        super().__init__(**kwargs)
        self.refine_config = refine_config

    def _estimate(self, snapshot: ChannelSnapshot) -> Tuple[PathSet, dict]:
        if snapshot.truth is None or snapshot.truth.gammas is None:
            raise InvalidInputError("Oracle initialization needs a snapshot with known truth")
        init = EstimationResult(paths=snapshot.truth, method=self.method)
        refined = gauss_newton_refine(init, snapshot, None, self.refine_config)
        return refined.paths, refined.diagnostics
