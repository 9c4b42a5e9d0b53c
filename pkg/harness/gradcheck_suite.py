"""Finite-difference gradient checks of every composite module on tiny 64-bit inputs."""
from __future__ import annotations

import logging
from typing import Callable

import numpy as np

from metrics.losses import combined_loss
from models.configs import LossConfig, ModelConfig
from network.bridge import EAG, PGA, PMI, PSA
from network.fusion import IRMLP, LGFF, SPE, FusionInputs, aci
from network.global_branch import SwinBlockPair
from network.local_branch import DuChResBlock
from tensor.gradcheck import finite_diff_gradcheck
from tensor.tensor import Tensor, default_dtype, no_grad

logger = logging.getLogger(__name__)

TOLERANCE = 1e-4


def _projection(shape: tuple[int, ...], rng: np.random.Generator) -> Tensor:
    return Tensor(rng.standard_normal(shape))


def _check(rng: np.random.Generator, shape: tuple[int, ...], fn: Callable[[Tensor], Tensor]) -> float:
    x = Tensor(rng.standard_normal(shape), requires_grad=True)
    with no_grad():
        weights = _projection(fn(x).shape, rng)
    return finite_diff_gradcheck(lambda t: (fn(t) * weights).sum(), x)


def run_suite(seed: int = 0) -> dict[str, float]:
    """Return the worst relative gradient error per module."""
    rng = np.random.default_rng(seed)
    results: dict[str, float] = {}
    with default_dtype(np.float64):
        results["duch_res_block"] = _check(rng, (2, 2, 4, 4), DuChResBlock(2, 4, rng))

        cfg = ModelConfig(window_size=2)
        results["swin_block_pair"] = _check(rng, (1, 4, 4, 4), SwinBlockPair(4, 2, 4, cfg, rng))

        results["aci"] = _check(rng, (1, 2, 4, 4), aci)
        results["spe"] = _check(rng, (1, 2, 4, 4), SPE(2, rng, reduction=2))
        results["irmlp"] = _check(rng, (1, 2, 4, 4), IRMLP(2, 2, rng))

        lgff = LGFF(2, rng, previous_channels=2, reduction=2)
        local = Tensor(rng.standard_normal((1, 2, 4, 4)))
        previous = Tensor(rng.standard_normal((1, 2, 8, 8)), requires_grad=True)
        results["lgff"] = _check(rng, (1, 2, 4, 4), lambda g: lgff(FusionInputs(local, g, previous)))

        pmi = PMI([2, 2, 2, 2], rng)
        levels = [Tensor(rng.standard_normal((2, 2, s, s))) for s in (4, 2, 1)]
        results["pmi"] = _check(rng, (2, 2, 8, 8), lambda x: pmi([x, *levels])[0])

        eag = EAG(4, 4, rng)
        bridge = Tensor(rng.standard_normal((2, 4, 4, 4)))
        results["eag"] = _check(rng, (2, 4, 4, 4), lambda d: eag(bridge, d))
        results["psa"] = _check(rng, (1, 4, 4, 4), PSA(4, rng))
        pga = PGA(4, 4, rng)
        results["pga"] = _check(rng, (2, 4, 4, 4), lambda d: pga(bridge, d))

        target = rng.integers(0, 3, size=(2, 4, 4))
        logits = Tensor(rng.standard_normal((2, 3, 4, 4)), requires_grad=True)
        results["combined_loss"] = finite_diff_gradcheck(lambda t: combined_loss(t, target, LossConfig()), logits)

    for name, err in results.items():
        logger.info("gradcheck %-16s %.3e", name, err)
    return results
