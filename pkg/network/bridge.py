"""Progressive pyramid aggregation: the PMI cascade and the PGA gate (EAG + PSA)."""
from __future__ import annotations

import logging
from math import gcd
from typing import Sequence

import numpy as np

from network.layers import Conv2d, ConvNormAct, Module, ModuleList
from tensor import functional as F
from tensor import ops
from tensor.tensor import ShapeError, Tensor

logger = logging.getLogger(__name__)

PSA_KERNELS = (3, 5, 7, 9)
PSA_GROUPS = (1, 4, 8, 16)


class PMIProjection(Module):
    """3x3 conv -> BN -> ReLU -> 1x1 conv."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.enhance = ConvNormAct(in_channels, out_channels, 3, rng, momentum=momentum, eps=eps)
        self.adjust = Conv2d(out_channels, out_channels, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.adjust(self.enhance(x))


class PMI(Module):
    """Cascading multiplicative integration down the pyramid.

    y4 = x4 and y_i = f(x_i) * f(Up(y_{i+1})) for i = 3, 2, 1.
    """

    def __init__(self, widths: Sequence[int], rng: np.random.Generator, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.widths = list(widths)
        self.skip = ModuleList([PMIProjection(w, w, rng, momentum, eps) for w in widths[:-1]])
        self.deep = ModuleList(
            [PMIProjection(widths[i + 1], widths[i], rng, momentum, eps) for i in range(len(widths) - 1)]
        )

    def forward(self, features: Sequence[Tensor]) -> list[Tensor]:
        if len(features) != len(self.widths):
            raise ShapeError(f"PMI expects {len(self.widths)} levels, got {len(features)}")
        for upper, lower in zip(features[:-1], features[1:]):
            if upper.shape[2:] != (2 * lower.shape[2], 2 * lower.shape[3]):
                raise ShapeError(f"pyramid extents must halve per level: {upper.shape} -> {lower.shape}")

        outputs: list[Tensor] = [features[-1]]
        for i in range(len(features) - 2, -1, -1):
            upsampled = F.resize2d(outputs[0], 2, "bilinear")
            outputs.insert(0, self.skip[i](features[i]) * self.deep[i](upsampled))
        return outputs


class EAG(Module):
    """Enhanced attention gate: d + d * sigmoid(conv1x1(relu(F_e + F_d)))."""

    def __init__(
        self,
        bridge_channels: int,
        decoder_channels: int,
        rng: np.random.Generator,
        groups: int = 4,
        momentum: float = 0.1,
        eps: float = 1e-5,
    ):
        super().__init__()
        inter = decoder_channels
        self.bridge_proj = ConvNormAct(
            bridge_channels, inter, 1, rng, groups=gcd(groups, gcd(bridge_channels, inter)), momentum=momentum, eps=eps
        )
        self.decoder_proj = ConvNormAct(
            decoder_channels, inter, 1, rng, groups=gcd(groups, inter), momentum=momentum, eps=eps
        )
        self.gate_conv = Conv2d(inter, 1, 1, rng)

    def gate(self, e: Tensor, d: Tensor) -> Tensor:
        if e.shape[0] != d.shape[0] or e.shape[2:] != d.shape[2:]:
            raise ShapeError(f"bridge {e.shape} and decoder {d.shape} features are misaligned")
        return F.sigmoid(self.gate_conv(F.relu(self.bridge_proj(e) + self.decoder_proj(d))))

    def forward(self, e: Tensor, d: Tensor) -> Tensor:
        return d + d * self.gate(e, d)


class SEWeight(Module):
    """Squeeze-excitation channel weights: avgpool -> 1x1 -> ReLU -> 1x1 -> sigmoid."""

    def __init__(self, channels: int, rng: np.random.Generator, reduction: int = 16):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.squeeze = Conv2d(channels, hidden, 1, rng)
        self.excite = Conv2d(hidden, channels, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        pooled = x.mean(axis=(2, 3), keepdims=True)
        return F.sigmoid(self.excite(F.relu(self.squeeze(pooled))))


class PSA(Module):
    """Pyramid split attention over four channel groups with kernels 3, 5, 7 and 9.

    One SE module is shared by the four scales; its outputs are softmax-normalized
    across scales at each channel slot.
    """

    def __init__(self, channels: int, rng: np.random.Generator, reduction: int = 16):
        super().__init__()
        if channels % len(PSA_KERNELS):
            raise ShapeError(f"PSA needs channels divisible by {len(PSA_KERNELS)}, got {channels}")
        self.split = channels // len(PSA_KERNELS)
        self.branches = ModuleList(
            [
                Conv2d(self.split, self.split, k, rng, groups=gcd(g, self.split))
                for k, g in zip(PSA_KERNELS, PSA_GROUPS)
            ]
        )
        self.se = SEWeight(self.split, rng, reduction)

    def _scales(self, x: Tensor) -> tuple[list[Tensor], Tensor]:
        if x.shape[1] != self.split * len(PSA_KERNELS):
            raise ShapeError(f"PSA expects {self.split * len(PSA_KERNELS)} channels, got {x.shape[1]}")
        n = x.shape[0]
        feats = [
            conv(x[:, i * self.split : (i + 1) * self.split]) for i, conv in enumerate(self.branches)
        ]
        logits = ops.concat([self.se(f).reshape(n, 1, self.split, 1, 1) for f in feats], axis=1)
        return feats, F.softmax(logits, axis=1)

    def scale_weights(self, x: Tensor) -> Tensor:
        """Cross-scale weights [N, 4, C/4, 1, 1]; they sum to 1 over axis 1."""
        return self._scales(x)[1]

    def forward(self, x: Tensor) -> Tensor:
        n, c, h, w = x.shape
        feats, weights = self._scales(x)
        stacked = ops.concat([f.reshape(n, 1, self.split, h, w) for f in feats], axis=1)
        return (stacked * weights).reshape(n, c, h, w)


class PGA(Module):
    """PSA(EAG(e, d)) with e from the bridge and d from the decoder."""

    def __init__(
        self,
        bridge_channels: int,
        decoder_channels: int,
        rng: np.random.Generator,
        groups: int = 4,
        momentum: float = 0.1,
        eps: float = 1e-5,
    ):
        super().__init__()
        self.eag = EAG(bridge_channels, decoder_channels, rng, groups, momentum, eps)
        self.psa = PSA(decoder_channels, rng)

    def forward(self, e: Tensor, d: Tensor) -> Tensor:
        return self.psa(self.eag(e, d))
