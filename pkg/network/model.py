'''
Four-stage convolutional network mapping the preprocessed snapshot to
(eta, rho).

    stage 1  shape-preserving conv blocks, channels doubling per block
    stage 2  stride-2 conv blocks, halving the spatial size
    stage 3  parameter head: channel-reducing conv blocks + 2 FC layers -> eta
    stage 4  model-order head: one conv block + 2 FC layers -> rho logits
'''
from dataclasses import asdict, dataclass, field
from typing import List, Tuple

import numpy as np
import torch
import torch.nn as nn

from channel.errors import InvalidInputError
from network.labels import CellGrid


@dataclass(frozen=True)
class NetworkConfig:
    n_freq: int = 64
    n_time: int = 64
    input_channels: int = 32
    stage1_blocks: int = 5
    base_channels: int = 32
    downsample_blocks: int = 3
    head_conv_blocks: int = 2
    head_reduction: int = 2
    # Lands the 64x64 default near 25e6 trainable parameters.
    fc_hidden: int = 832
    kernel_size: int = 3
    cell_grid: CellGrid = field(default_factory = CellGrid)
    p_max: int = 20

    def __post_init__(self):
        if self.kernel_size % 2 != 1:
            raise InvalidInputError(f"kernel_size must be odd to preserve shapes, got {self.kernel_size}")
        if self.p_max > self.cell_grid.n_slots:
            raise InvalidInputError(f"p_max={self.p_max} exceeds the {self.cell_grid.n_slots} label slots")
        if self.head_channels < 1:
            raise InvalidInputError("head_reduction leaves no channels for the heads")

    @property
    def stage1_channels(self) -> List[int]:
        return [self.base_channels * 2 ** b for b in range(self.stage1_blocks)]

    @property
    def feature_channels(self) -> int:
        return self.stage1_channels[-1]

    @property
    def head_channels(self) -> int:
        return self.feature_channels // self.head_reduction ** self.head_conv_blocks

    @property
    def feature_size(self) -> Tuple[int, int]:
        """Spatial size after the downsampling stage."""
        pad = self.kernel_size // 2
        height, width = self.n_freq, self.n_time
        for _ in range(self.downsample_blocks):
            height = (height + 2 * pad - self.kernel_size) // 2 + 1
            width = (width + 2 * pad - self.kernel_size) // 2 + 1
        return height, width

    @property
    def eta_size(self) -> int:
        return int(np.prod(self.cell_grid.eta_shape))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'NetworkConfig':
        data = dict(data)
        data['cell_grid'] = CellGrid(**data['cell_grid'])
        return cls(**data)


def conv_block(in_channels: int, out_channels: int, kernel_size: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, kernel_size, stride=stride, padding=kernel_size // 2, bias=False),
        nn.BatchNorm2d(out_channels),
        nn.ReLU(inplace=True),
    )


class HarmonicNet(nn.Module):
    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        k = config.kernel_size

        blocks, channels = [], config.input_channels
        for out_channels in config.stage1_channels:
            blocks.append(conv_block(channels, out_channels, k))
            channels = out_channels
        self.upscale = nn.Sequential(*blocks)

        self.downsample = nn.Sequential(*[
            conv_block(channels, channels, k, stride=2) for _ in range(config.downsample_blocks)
        ])

        blocks, head = [], channels
        for _ in range(config.head_conv_blocks):
            blocks.append(conv_block(head, head // config.head_reduction, k))
            head //= config.head_reduction
        self.param_conv = nn.Sequential(*blocks)

        height, width = config.feature_size
        flat = config.head_channels * height * width
        self.param_fc = nn.Sequential(
            nn.Flatten(),
            nn.Linear(flat, config.fc_hidden),
            nn.ReLU(inplace=True),
            nn.Linear(config.fc_hidden, config.eta_size),
        )

        self.order_conv = conv_block(channels, config.head_channels, k)
        self.order_fc = nn.Sequential(
            nn.Flatten(),
            nn.Linear(flat, config.fc_hidden),
            nn.ReLU(inplace=True),
            nn.Linear(config.fc_hidden, config.p_max),
        )

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        features = self.downsample(self.upscale(x))
        eta = self.param_fc(self.param_conv(features))
        rho = self.order_fc(self.order_conv(features))
        return eta.view(-1, *self.config.cell_grid.eta_shape), rho


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def check_input_shape(inputs: np.ndarray, config: NetworkConfig) -> None:
    expected = (config.input_channels, config.n_freq, config.n_time)
    if tuple(inputs.shape[-3:]) != expected:
        raise InvalidInputError(f"Network input has shape {tuple(inputs.shape)}, expected (..., {expected})")


@torch.no_grad()
def predict(model: HarmonicNet, inputs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    '''
    Inference-mode forward pass on a single tensor (C, F, T) or a batch
    (B, C, F, T). Returns raw eta (unbounded) and rho logits as numpy arrays.
    '''
    inputs = np.asarray(inputs)
    check_input_shape(inputs, model.config)
    single = inputs.ndim == 3
    batch = torch.as_tensor(inputs[None] if single else inputs, dtype=torch.float32)
    device = next(model.parameters()).device

    model.eval()
    eta, rho = model(batch.to(device))
    eta, rho = eta.cpu().numpy(), rho.cpu().numpy()
    return (eta[0], rho[0]) if single else (eta, rho)
