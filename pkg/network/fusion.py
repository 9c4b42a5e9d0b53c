"""Local-global feature fusion (LGFF) and its submodules ACI, SPE and IRMLP."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from network.layers import Conv2d, Module
from tensor import functional as F
from tensor import ops
from tensor.tensor import ShapeError, Tensor


logger = logging.getLogger(__name__)


@dataclass
class FusionInputs:
    """Inputs of one LGFF stage; ``previous`` is the fused map of the stage above (None at stage 1)."""

    local: Tensor
    global_: Tensor
    previous: Optional[Tensor] = None

    def validate(self) -> None:
        if self.local.shape != self.global_.shape:
            raise ShapeError(f"local {self.local.shape} and global {self.global_.shape} features are misaligned")
        if self.previous is not None:
            n, _, h, w = self.local.shape
            if self.previous.shape[0] != n or self.previous.shape[2:] != (2 * h, 2 * w):
                raise ShapeError(
                    f"previous fused map {self.previous.shape} must have twice the extent of {self.local.shape}"
                )


@dataclass
class StageFeature:
    """Per-stage triple of local, global and fused feature maps."""

    local: Optional[Tensor]
    global_: Optional[Tensor]
    fused: Tensor

    @property
    def channels(self) -> int:
        return self.fused.shape[1]

    @property
    def resolution(self) -> tuple[int, int]:
        return self.fused.shape[2], self.fused.shape[3]


def aci(x: Tensor) -> Tensor:
    """Channel-affinity attention with residual: x + R(softmax(R(x) R(x)^T) R(x)).

    The softmax runs along rows of the C x C affinity.
    """
    n, c, h, w = x.shape
    flat = x.reshape(n, c, h * w)
    affinity = flat @ flat.transpose(0, 2, 1)
    weights = F.softmax(affinity, axis=-1)
    return x + (weights @ flat).reshape(n, c, h, w)


class SPE(Module):
    """Spatial gate: x * sigmoid(conv7x7(conv7x7(x))) with channel plan C -> C/r -> C."""

    def __init__(self, channels: int, rng: np.random.Generator, reduction: int = 4):
        super().__init__()
        if channels % reduction:
            raise ShapeError(f"SPE reduction {reduction} does not divide {channels} channels")
        hidden = channels // reduction
        self.reduce = Conv2d(channels, hidden, 7, rng)
        self.expand = Conv2d(hidden, channels, 7, rng)

    def gate(self, x: Tensor) -> Tensor:
        return F.sigmoid(self.expand(self.reduce(x)))

    def forward(self, x: Tensor) -> Tensor:
        return x * self.gate(x)


class IRMLP(Module):
    """Depthwise 3x3 with residual, then pointwise expansion (GELU) and projection."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator, ratio: int = 4):
        super().__init__()
        self.depthwise = Conv2d(in_channels, in_channels, 3, rng, groups=in_channels)
        self.expand = Conv2d(in_channels, ratio * in_channels, 1, rng)
        self.project = Conv2d(ratio * in_channels, out_channels, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        inner = self.depthwise(x) + x
        return self.project(F.gelu(self.expand(inner)))


class LGFF(Module):
    """Fuses L_i, G_i and the previous fused map F_{i-1} into F_i.

    F_mid1 = avgpool(conv1x1(F_{i-1})), zeros at stage 1
    F_mid2 = conv1x1([L, F_mid1, G])
    F_i    = IRMLP([ACI(L), F_mid2, SPE(G)]) + F_mid1
    """

    def __init__(
        self,
        channels: int,
        rng: np.random.Generator,
        previous_channels: Optional[int] = None,
        reduction: int = 4,
        irmlp_ratio: int = 4,
    ):
        super().__init__()
        self.channels = channels
        self.align = Conv2d(previous_channels, channels, 1, rng) if previous_channels else None
        self.mix = Conv2d(3 * channels, channels, 1, rng)
        self.spe = SPE(channels, rng, reduction)
        self.irmlp = IRMLP(3 * channels, channels, rng, irmlp_ratio)

    def forward(self, inputs: FusionInputs) -> Tensor:
        inputs.validate()
        local, global_ = inputs.local, inputs.global_
        if local.shape[1] != self.channels:
            raise ShapeError(f"LGFF expects {self.channels} channels, got {local.shape[1]}")
        if (inputs.previous is None) != (self.align is None):
            raise ShapeError("previous fused map must be given exactly for stages after the first")

        if inputs.previous is None:
            mid1 = ops.zeros(local.shape, like=local)
        else:
            mid1 = F.pool2d(self.align(inputs.previous), "avg", 2)
        mid2 = self.mix(ops.concat([local, mid1, global_], axis=1))
        return self.irmlp(ops.concat([aci(local), mid2, self.spe(global_)], axis=1)) + mid1
