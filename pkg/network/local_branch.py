"""Local branch: 7x7 stem followed by four max-pool + DuChResBlock stages."""
from __future__ import annotations

import logging

import numpy as np

from models.configs import ModelConfig
from network.layers import Conv2d, ConvNormAct, Module, ModuleList
from tensor import functional as F
from tensor import ops
from tensor.tensor import ShapeError, Tensor

logger = logging.getLogger(__name__)

INPUT_MULTIPLE = 32


class Stem(Module):
    """7x7 stride-2 conv + norm + ReLU halving the input resolution."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.block = ConvNormAct(in_channels, out_channels, 7, rng, stride=2, momentum=momentum, eps=eps)

    def forward(self, image: Tensor) -> Tensor:
        height, width = image.shape[2:]
        if height % INPUT_MULTIPLE or width % INPUT_MULTIPLE:
            raise ShapeError(f"input extent {height}x{width} must be divisible by {INPUT_MULTIPLE}")
        return self.block(image)


class DuChResBlock(Module):
    """Dual-channel residual block.

    Branch t applies two standard 3x3 conv units with a residual, branch d two
    dilated ones; a 1x1 conv merges the concatenated branches to ``out_channels``.
    Every conv unit has its own weights.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        rng: np.random.Generator,
        dilation: int = 2,
        momentum: float = 0.1,
        eps: float = 1e-5,
    ):
        super().__init__()
        self.in_channels = in_channels
        self.standard_1 = ConvNormAct(in_channels, in_channels, 3, rng, momentum=momentum, eps=eps)
        self.standard_2 = ConvNormAct(in_channels, in_channels, 3, rng, momentum=momentum, eps=eps)
        self.dilated_1 = ConvNormAct(in_channels, in_channels, 3, rng, dilation=dilation, momentum=momentum, eps=eps)
        self.dilated_2 = ConvNormAct(in_channels, in_channels, 3, rng, dilation=dilation, momentum=momentum, eps=eps)
        self.merge = Conv2d(2 * in_channels, out_channels, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(f"DuChResBlock expects {self.in_channels} channels, got shape {x.shape}")
        standard = x + self.standard_2(self.standard_1(x))
        dilated = x + self.dilated_2(self.dilated_1(x))
        return self.merge(ops.concat([standard, dilated], axis=1))


class LocalBranch(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        bn = dict(momentum=cfg.bn_momentum, eps=cfg.bn_eps)
        self.stem = Stem(cfg.in_channels, cfg.stem_width, rng, **bn)
        in_widths = [cfg.stem_width, *cfg.widths[:-1]]
        self.stages = ModuleList(
            [DuChResBlock(c_in, c_out, rng, dilation=cfg.dilation, **bn) for c_in, c_out in zip(in_widths, cfg.widths)]
        )

    def forward(self, image: Tensor) -> list[Tensor]:
        """Return [L1, L2, L3, L4] at 1/4, 1/8, 1/16 and 1/32 of the input extent."""
        x = self.stem(image)
        features = []
        for block in self.stages:
            x = block(F.pool2d(x, "max", 2))
            features.append(x)
        return features
