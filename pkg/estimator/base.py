# Abstract class for snapshot estimators

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from channel.state import ChannelSnapshot, PathSet


class Method(Enum):
    PERIODOGRAM = 'periodogram'
    CNN = 'cnn'
    CNN_GN = 'cnn+gn'
    GN_ORACLE_INIT = 'gn-oracle-init'

    @classmethod
    def from_label(cls, label: str) -> Optional['Method']:
        for method in cls:
            if method.value == label:
                return method
        return None


@dataclass(frozen=True, eq=False)
class EstimationResult:
    paths: PathSet
    method: Method
    wall_time: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def p_hat(self) -> int:
        return self.paths.count

    @property
    def taus(self) -> np.ndarray:
        return self.paths.taus

    @property
    def alphas(self) -> np.ndarray:
        return self.paths.alphas

    @property
    def gammas(self) -> Optional[np.ndarray]:
        return self.paths.gammas


class BaseEstimator(ABC):
    method: Method

    def __init__(self, *args, **kwargs):
        pass

    def estimate(self, snapshot: ChannelSnapshot) -> EstimationResult:
        """
        Estimate the paths of one snapshot.

        Returns:
            An EstimationResult tagged with this estimator's method, whose
            wall_time covers the whole call.
        """
        start = time.perf_counter()
        paths, diagnostics = self._estimate(snapshot)
        elapsed = time.perf_counter() - start
        return EstimationResult(paths=paths, method=self.method, wall_time=elapsed, diagnostics=diagnostics)

    @abstractmethod
    def _estimate(self, snapshot: ChannelSnapshot) -> Tuple[PathSet, dict]:
        pass
