"""Full network: three-branch encoder, pyramid bridge and multi-scale decoder."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from models.configs import ModelConfig
from network.bridge import PGA, PMI
from network.fusion import LGFF, FusionInputs, StageFeature
from network.global_branch import GlobalBranch
from network.layers import Conv2d, ConvNormAct, Module, ModuleList
from network.local_branch import LocalBranch
from tensor import functional as F
from tensor import ops
from tensor.tensor import ShapeError, Tensor, no_grad

logger = logging.getLogger(__name__)


@dataclass
class SegmentationOutput:
    """Per-class logits [N, num_classes, H, W] at the input resolution."""

    logits: Tensor

    def labels(self) -> np.ndarray:
        return self.logits.data.argmax(axis=1).astype(np.int64)


class Encoder(Module):
    """Runs the enabled branches and fuses them stage by stage."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.local = LocalBranch(cfg, rng) if cfg.use_local else None
        self.global_ = GlobalBranch(cfg, rng) if cfg.use_global else None
        if cfg.use_lgff:
            previous = [None, *cfg.widths[:-1]]
            self.fusion = ModuleList(
                [
                    LGFF(w, rng, previous_channels=p, reduction=cfg.spe_reduction, irmlp_ratio=cfg.irmlp_ratio)
                    for w, p in zip(cfg.widths, previous)
                ]
            )
        else:
            self.fusion = None

    def forward(self, image: Tensor) -> list[StageFeature]:
        locals_ = self.local(image) if self.local is not None else [None] * 4
        globals_ = self.global_(image) if self.global_ is not None else [None] * 4
        stages: list[StageFeature] = []
        previous: Optional[Tensor] = None
        for i, (local, global_) in enumerate(zip(locals_, globals_)):
            if self.fusion is not None:
                fused = self.fusion[i](FusionInputs(local, global_, previous))
            elif local is not None and global_ is not None:
                fused = local + global_
            else:
                fused = local if local is not None else global_
            stages.append(StageFeature(local, global_, fused))
            previous = fused
        return stages


class DecoderBlock(Module):
    """Two 3x3 conv + BN + ReLU units."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.first = ConvNormAct(in_channels, out_channels, 3, rng, momentum=momentum, eps=eps)
        self.second = ConvNormAct(out_channels, out_channels, 3, rng, momentum=momentum, eps=eps)

    def forward(self, x: Tensor) -> Tensor:
        return self.second(self.first(x))


class DecoderLevel(Module):
    """Upsample the deeper decoder map, merge it with the bridge feature and refine."""

    def __init__(self, deep_channels: int, channels: int, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        bn = dict(momentum=cfg.bn_momentum, eps=cfg.bn_eps)
        self.align = Conv2d(deep_channels, channels, 1, rng)
        self.pga = PGA(channels, channels, rng, cfg.pga_groups, **bn) if cfg.use_pga else None
        self.merge_mode = cfg.pga_merge if cfg.use_pga else "concat"
        self.merge = Conv2d(2 * channels, channels, 1, rng) if self.merge_mode == "concat" else None
        self.block = DecoderBlock(channels, channels, rng, **bn)

    def forward(self, bridge: Tensor, deeper: Tensor) -> Tensor:
        up = self.align(F.resize2d(deeper, 2, "bilinear"))
        if up.shape != bridge.shape:
            raise ShapeError(f"decoder map {up.shape} does not match bridge feature {bridge.shape}")
        gated = self.pga(bridge, up) if self.pga is not None else up
        if self.merge is None:
            merged = gated + bridge
        else:
            merged = self.merge(ops.concat([gated, bridge], axis=1))
        return self.block(merged)


class Decoder(Module):
    """Ascends from y4 and fuses the four decoder outputs by summing upsampled class maps."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        widths = cfg.widths
        self.seed_block = DecoderBlock(widths[3], widths[3], rng, cfg.bn_momentum, cfg.bn_eps)
        self.levels = ModuleList([DecoderLevel(widths[i + 1], widths[i], cfg, rng) for i in range(3)])
        self.heads = ModuleList([Conv2d(w, cfg.num_classes, 1, rng) for w in widths])

    def forward(self, bridge: list[Tensor], image_size: int) -> Tensor:
        d = self.seed_block(bridge[3])
        outputs = {3: d}
        for i in (2, 1, 0):
            d = self.levels[i](bridge[i], d)
            outputs[i] = d
        logits = None
        for i, out in outputs.items():
            scaled = F.resize2d(self.heads[i](out), image_size // out.shape[2], "bilinear")
            logits = scaled if logits is None else logits + scaled
        return logits


class HiPerformer(Module):
    """Hybrid CNN/attention segmentation network.

    Args:
        cfg: architecture and ablation switches
        seed: seed of the weight initializer
    """

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        self.encoder = Encoder(cfg, rng)
        self.pmi = PMI(cfg.widths, rng, cfg.bn_momentum, cfg.bn_eps) if cfg.use_pmi else None
        self.decoder = Decoder(cfg, rng)
        logger.debug("built model with %d parameters", self.num_parameters())

    def encode(self, image: Tensor) -> list[StageFeature]:
        expected = (self.cfg.in_channels, self.cfg.image_size, self.cfg.image_size)
        if image.ndim != 4 or image.shape[1:] != expected:
            raise ShapeError(f"expected image [N, {expected[0]}, {expected[1]}, {expected[2]}], got {image.shape}")
        return self.encoder(image)

    def forward(self, image: Tensor) -> SegmentationOutput:
        stages = self.encode(image)
        fused = [s.fused for s in stages]
        bridge = self.pmi(fused) if self.pmi is not None else fused
        return SegmentationOutput(self.decoder(bridge, self.cfg.image_size))

    def predict(self, images: Union[np.ndarray, Tensor]) -> np.ndarray:
        """Argmax label maps [N, H, W] computed in eval mode without recording gradients."""
        was_training = self.training
        self.eval()
        try:
            with no_grad():
                batch = images if isinstance(images, Tensor) else Tensor(images)
                return self.forward(batch).labels()
        finally:
            self.train(was_training)


def param_count(cfg: ModelConfig) -> int:
    """Exact number of learnable scalars for ``cfg``."""
    return HiPerformer(cfg).num_parameters()
