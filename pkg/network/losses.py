from enum import Enum
from typing import Optional

import torch
import torch.nn.functional as F


class OrderLoss(Enum):
    BCE = 'bce'             # independent sigmoid per model order
    SOFTMAX = 'softmax'     # softmax + cross-entropy ablation

    @classmethod
    def from_label(cls, label: str) -> Optional['OrderLoss']:
        for loss in cls:
            if loss.value == label:
                return loss
        return None


class GateMode(Enum):
    PREDICTED = 'predicted'   # gate by sigmoid of the predicted mu
    TRUE = 'true'             # gate by the ground-truth mu (ablation)

    @classmethod
    def from_label(cls, label: str) -> Optional['GateMode']:
        for mode in cls:
            if mode.value == label:
                return mode
        return None


def _slots(eta: torch.Tensor) -> torch.Tensor:
    """(..., I, J, 3C) -> (..., I * J * C, 3)."""
    return eta.reshape(*eta.shape[:-3], -1, 3)


def loss_model_order(rho_logits: torch.Tensor, rho_true: torch.Tensor, mode: OrderLoss = OrderLoss.BCE) -> torch.Tensor:
    '''
    Binary cross-entropy of the one-hot model order, averaged over classes
    (and batch). Zero when the logits saturate towards the target.
    '''
    if mode == OrderLoss.SOFTMAX:
        return F.cross_entropy(rho_logits.reshape(-1, rho_logits.shape[-1]), rho_true.reshape(-1, rho_true.shape[-1]).argmax(-1))
    return F.binary_cross_entropy_with_logits(rho_logits, rho_true)


def loss_params(eta_pred: torch.Tensor, eta_true: torch.Tensor, gate: GateMode = GateMode.PREDICTED) -> torch.Tensor:
    '''
    Masked offset loss: sum over slots of (sigmoid(mu_hat) * ||d_hat - d||_1)^2.

    A strongly negative mu_hat switches a slot's offsets out of the loss.
    Batched inputs are summed per sample and averaged over the batch.
    '''
    pred, true = _slots(eta_pred), _slots(eta_true)
    if gate == GateMode.TRUE:
        weight = true[..., 0]
    else:
        weight = torch.sigmoid(pred[..., 0])
    distance = (pred[..., 1:] - true[..., 1:]).abs().sum(-1)
    per_sample = ((weight * distance) ** 2).sum(-1)
    return per_sample.mean()


def loss_detection(eta_pred: torch.Tensor, eta_true: torch.Tensor) -> torch.Tensor:
    """BCE of the slot occupancy logits against the true mu."""
    pred, true = _slots(eta_pred), _slots(eta_true)
    return F.binary_cross_entropy_with_logits(pred[..., 0], true[..., 0])


def loss_total(
    eta_pred: torch.Tensor,
    eta_true: torch.Tensor,
    rho_logits: torch.Tensor,
    rho_true: torch.Tensor,
    beta: float = 4.0,
    order_loss: OrderLoss = OrderLoss.BCE,
    gate: GateMode = GateMode.PREDICTED,
) -> torch.Tensor:
    return loss_model_order(rho_logits, rho_true, order_loss) + beta * loss_params(eta_pred, eta_true, gate)
