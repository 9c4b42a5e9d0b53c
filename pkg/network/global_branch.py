"""Global branch: patch embedding and four stages of (shifted) window attention blocks.

Feature maps stay channels-first [N, C, H, W] between blocks; attention works on
windows of shape [N * nW, C, M, M] and the MLP on channels-last tokens.
"""
from __future__ import annotations

import logging
from functools import lru_cache
from typing import Optional

import numpy as np

from models.configs import ModelConfig
from network.layers import Conv2d, LayerNorm, Linear, Module, ModuleList, Parameter, to_channels_first, to_channels_last, trunc_normal
from tensor import functional as F
from tensor import ops
from tensor.tensor import ShapeError, Tensor, as_tensor

logger = logging.getLogger(__name__)

PATCH_SIZE = 4
MASK_VALUE = -100.0


class PatchEmbed(Module):
    """Non-overlapping 4x4 patch projection followed by channel LayerNorm."""

    def __init__(self, in_channels: int, dim: int, rng: np.random.Generator, eps: float = 1e-5):
        super().__init__()
        self.proj = Conv2d(in_channels, dim, PATCH_SIZE, rng, stride=PATCH_SIZE, padding=0)
        self.norm = LayerNorm(dim, eps, axis=1)

    def forward(self, image: Tensor) -> Tensor:
        height, width = image.shape[2:]
        if height % PATCH_SIZE or width % PATCH_SIZE:
            raise ShapeError(f"input extent {height}x{width} not divisible by patch size {PATCH_SIZE}")
        return self.norm(self.proj(image))


def window_partition(x: Tensor, window: int) -> Tensor:
    """[N, C, H, W] -> [N * (H/M) * (W/M), C, M, M], windows in row-major order per image."""
    n, c, h, w = x.shape
    if h % window or w % window:
        raise ShapeError(f"extent {h}x{w} not divisible by window size {window}")
    rows, cols = h // window, w // window
    x = x.reshape(n, c, rows, window, cols, window).transpose(0, 2, 4, 1, 3, 5)
    return x.reshape(n * rows * cols, c, window, window)


def window_reverse(windows: Tensor, window: int, height: int, width: int) -> Tensor:
    """Inverse of ``window_partition``."""
    if height % window or width % window:
        raise ShapeError(f"extent {height}x{width} not divisible by window size {window}")
    rows, cols = height // window, width // window
    count, c = windows.shape[:2]
    if count % (rows * cols):
        raise ShapeError(f"{count} windows do not tile a {height}x{width} map")
    n = count // (rows * cols)
    x = windows.reshape(n, rows, cols, c, window, window).transpose(0, 3, 1, 4, 2, 5)
    return x.reshape(n, c, height, width)


@lru_cache(maxsize=None)
def relative_position_index(window: int) -> np.ndarray:
    """(M*M, M*M) index into the ((2M-1)^2, heads) bias table."""
    coords = np.stack(np.meshgrid(np.arange(window), np.arange(window), indexing="ij")).reshape(2, -1)
    relative = coords[:, :, None] - coords[:, None, :] + (window - 1)
    index = relative[0] * (2 * window - 1) + relative[1]
    index.setflags(write=False)
    return index


def shift_region_ids(height: int, width: int, window: int, shift: int) -> np.ndarray:
    """Label each pixel with the pre-shift region it came from after a cyclic shift."""
    ids = np.zeros((height, width), dtype=np.int64)
    spans = (slice(0, -window), slice(-window, -shift), slice(-shift, None))
    label = 0
    for rows in spans:
        for cols in spans:
            ids[rows, cols] = label
            label += 1
    return ids


@lru_cache(maxsize=None)
def build_shift_mask(height: int, width: int, window: int, shift: int) -> np.ndarray:
    """(nW, M*M, M*M) additive mask: 0 within a region, -100 across regions."""
    ids = shift_region_ids(height, width, window, shift)
    per_window = ids.reshape(height // window, window, width // window, window).transpose(0, 2, 1, 3)
    per_window = per_window.reshape(-1, window * window)
    mask = np.where(per_window[:, None, :] != per_window[:, :, None], MASK_VALUE, 0.0)
    mask.setflags(write=False)
    return mask


class WindowAttention(Module):
    """Multi-head self-attention inside each M x M window."""

    def __init__(
        self,
        dim: int,
        heads: int,
        window: int,
        rng: np.random.Generator,
        qkv_bias: bool = True,
        relative_position_bias: bool = True,
    ):
        super().__init__()
        if dim % heads:
            raise ShapeError(f"{heads} heads do not divide channel width {dim}")
        self.dim, self.heads, self.window = dim, heads, window
        self.scale = (dim // heads) ** -0.5
        self.qkv = Linear(dim, 3 * dim, rng, bias=qkv_bias)
        self.proj = Linear(dim, dim, rng)
        self.bias_table = (
            Parameter(trunc_normal(((2 * window - 1) ** 2, heads), rng)) if relative_position_bias else None
        )

    def _attend(self, windows: Tensor, mask: Optional[np.ndarray]) -> tuple[Tensor, Tensor]:
        count, c, m, _ = windows.shape
        if c != self.dim or m != self.window:
            raise ShapeError(f"expected windows [*, {self.dim}, {self.window}, {self.window}], got {windows.shape}")
        n, h = m * m, self.heads
        tokens = windows.reshape(count, c, n).transpose(0, 2, 1)
        qkv = self.qkv(tokens).reshape(count, n, 3, h, c // h).transpose(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        scores = (q @ k.transpose(0, 1, 3, 2)) * self.scale
        if self.bias_table is not None:
            index = relative_position_index(m).reshape(-1)
            bias = ops.gather(self.bias_table, index).reshape(n, n, h).transpose(2, 0, 1)
            scores = scores + bias
        if mask is not None:
            num_windows = mask.shape[0]
            if count % num_windows:
                raise ShapeError(f"{count} windows incompatible with a {num_windows}-window mask")
            scores = scores.reshape(count // num_windows, num_windows, h, n, n)
            scores = (scores + as_tensor(mask[None, :, None], like=scores)).reshape(count, h, n, n)
        return F.softmax(scores, axis=-1), v

    def attention_probs(self, windows: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        """Attention weights [N*nW, heads, M*M, M*M]; rows sum to 1."""
        probs, _ = self._attend(windows, mask)
        return probs

    def forward(self, windows: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        count, c, m, _ = windows.shape
        probs, v = self._attend(windows, mask)
        out = (probs @ v).transpose(0, 2, 1, 3).reshape(count, m * m, c)
        return self.proj(out).transpose(0, 2, 1).reshape(count, c, m, m)


def wmsa(windows: Tensor, attention: WindowAttention, mask: Optional[np.ndarray] = None) -> Tensor:
    return attention(windows, mask)


def swmsa(x: Tensor, attention: WindowAttention, shift: int) -> Tensor:
    """Cyclically shift by ``shift``, attend within masked windows, shift back."""
    height, width = x.shape[2:]
    window = attention.window
    shifted = ops.roll(x, (-shift, -shift), (2, 3))
    windows = window_partition(shifted, window)
    out = wmsa(windows, attention, build_shift_mask(height, width, window, shift))
    return ops.roll(window_reverse(out, window, height, width), (shift, shift), (2, 3))


class SwinBlock(Module):
    """LN -> (S)W-MSA -> residual, then LN -> MLP -> residual."""

    def __init__(
        self,
        dim: int,
        heads: int,
        window: int,
        shift: int,
        rng: np.random.Generator,
        mlp_ratio: int = 4,
        qkv_bias: bool = True,
        relative_position_bias: bool = True,
        eps: float = 1e-5,
    ):
        super().__init__()
        self.window, self.shift = window, shift
        self.norm1 = LayerNorm(dim, eps, axis=1)
        self.attn = WindowAttention(dim, heads, window, rng, qkv_bias, relative_position_bias)
        self.norm2 = LayerNorm(dim, eps, axis=1)
        self.fc1 = Linear(dim, mlp_ratio * dim, rng)
        self.fc2 = Linear(mlp_ratio * dim, dim, rng)

    def _attention(self, x: Tensor) -> Tensor:
        height, width = x.shape[2:]
        pad_h, pad_w = -height % self.window, -width % self.window
        if pad_h or pad_w:
            x = ops.pad(x, ((0, 0), (0, 0), (0, pad_h), (0, pad_w)))
        padded_h, padded_w = height + pad_h, width + pad_w
        if self.shift:
            out = swmsa(x, self.attn, self.shift)
        else:
            windows = window_partition(x, self.window)
            out = window_reverse(wmsa(windows, self.attn), self.window, padded_h, padded_w)
        if pad_h or pad_w:
            out = out[:, :, :height, :width]
        return out

    def forward(self, z: Tensor) -> Tensor:
        z = z + self._attention(self.norm1(z))
        hidden = to_channels_last(self.norm2(z))
        return z + to_channels_first(self.fc2(F.gelu(self.fc1(hidden))))


class SwinBlockPair(Module):
    """A W-MSA block followed by an SW-MSA block.

    Maps whose extent does not exceed the window use a window equal to the extent
    and skip the shift.
    """

    def __init__(self, dim: int, heads: int, resolution: int, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        if resolution > cfg.window_size:
            window, shift = cfg.window_size, cfg.window_size // 2
        else:
            window, shift = resolution, 0
        options = dict(
            mlp_ratio=cfg.mlp_ratio,
            qkv_bias=cfg.qkv_bias,
            relative_position_bias=cfg.relative_position_bias,
            eps=cfg.ln_eps,
        )
        self.regular = SwinBlock(dim, heads, window, 0, rng, **options)
        self.shifted = SwinBlock(dim, heads, window, shift, rng, **options)

    def forward(self, z: Tensor) -> Tensor:
        return self.shifted(self.regular(z))


class PatchMerging(Module):
    """2x2 neighbourhood concat (4C) -> LN -> linear reduction to ``out_dim``."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, eps: float = 1e-5):
        super().__init__()
        self.norm = LayerNorm(4 * in_dim, eps, axis=1)
        self.reduction = Linear(4 * in_dim, out_dim, rng, bias=False)

    def forward(self, x: Tensor) -> Tensor:
        height, width = x.shape[2:]
        if height % 2 or width % 2:
            raise ShapeError(f"patch merging needs even extents, got {height}x{width}")
        quads = [x[:, :, 0::2, 0::2], x[:, :, 1::2, 0::2], x[:, :, 0::2, 1::2], x[:, :, 1::2, 1::2]]
        merged = self.norm(ops.concat(quads, axis=1))
        return to_channels_first(self.reduction(to_channels_last(merged)))


class GlobalStage(Module):
    def __init__(
        self,
        in_dim: int,
        dim: int,
        depth: int,
        heads: int,
        resolution: int,
        cfg: ModelConfig,
        rng: np.random.Generator,
        merge: bool,
    ):
        super().__init__()
        self.merge = PatchMerging(in_dim, dim, rng, cfg.ln_eps) if merge else None
        self.pairs = ModuleList([SwinBlockPair(dim, heads, resolution, cfg, rng) for _ in range(depth // 2)])

    def forward(self, x: Tensor) -> Tensor:
        if self.merge is not None:
            x = self.merge(x)
        for pair in self.pairs:
            x = pair(x)
        return x


class GlobalBranch(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.patch_embed = PatchEmbed(cfg.in_channels, cfg.widths[0], rng, cfg.ln_eps)
        in_dims = [cfg.widths[0], *cfg.widths[:-1]]
        self.stages = ModuleList(
            [
                GlobalStage(
                    in_dims[s],
                    cfg.widths[s],
                    cfg.depths[s],
                    cfg.stage_heads[s],
                    cfg.stage_resolution(s),
                    cfg,
                    rng,
                    merge=s > 0,
                )
                for s in range(4)
            ]
        )

    def forward(self, image: Tensor) -> list[Tensor]:
        """Return [G1, G2, G3, G4], spatially aligned with the local branch."""
        x = self.patch_embed(image)
        features = []
        for stage in self.stages:
            x = stage(x)
            features.append(x)
        return features
