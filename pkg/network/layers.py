"""Module base class and the parameterized layers the architecture is built from."""
from __future__ import annotations

import logging
from typing import Any, Iterator, Optional, Sequence

import numpy as np

from tensor import functional as F
from tensor import ops
from tensor.tensor import ShapeError, Tensor, get_default_dtype

logger = logging.getLogger(__name__)


class Parameter(Tensor):
    """Learnable leaf tensor."""

    def __init__(self, data: np.ndarray):
        super().__init__(data, requires_grad=True, dtype=get_default_dtype())


def kaiming_uniform(shape: Sequence[int], fan_in: int, rng: np.random.Generator) -> np.ndarray:
    """Fan-in Kaiming-uniform for ReLU nets: U(-sqrt(6/fan_in), sqrt(6/fan_in))."""
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=tuple(shape))


def trunc_normal(shape: Sequence[int], rng: np.random.Generator, std: float = 0.02) -> np.ndarray:
    """Normal(0, std) truncated at two standard deviations (by resampling)."""
    values = rng.standard_normal(size=tuple(shape))
    outside = np.abs(values) > 2.0
    while outside.any():
        values[outside] = rng.standard_normal(size=int(outside.sum()))
        outside = np.abs(values) > 2.0
    return values * std


class Module:
    """Container of parameters, buffers and sub-modules.

    Attribute order defines parameter order, which keeps checkpoints and the
    optimizer state deterministic.
    """

    def __init__(self) -> None:
        self.training = True
        self._buffers: dict[str, np.ndarray] = {}

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        return self.forward(*args, **kwargs)

    def forward(self, *args: Any, **kwargs: Any) -> Any:
        raise NotImplementedError(f"{type(self).__name__}.forward")

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = value

    def buffer(self, name: str) -> np.ndarray:
        return self._buffers[name]

    def named_children(self) -> Iterator[tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value

    def named_modules(self, prefix: str = "") -> Iterator[tuple[str, "Module"]]:
        yield prefix, self
        for name, child in self.named_children():
            yield from child.named_modules(f"{prefix}.{name}" if prefix else name)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            path = f"{prefix}.{name}" if prefix else name
            if isinstance(value, Parameter):
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(path)

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for module_path, module in self.named_modules(prefix):
            for name, value in module._buffers.items():
                yield (f"{module_path}.{name}" if module_path else name), value

    def train(self, mode: bool = True) -> "Module":
        for _, module in self.named_modules():
            module.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def astype(self, dtype: Any) -> "Module":
        """Cast parameters and buffers in place (e.g. to float64 for gradchecks)."""
        for p in self.parameters():
            p.data = p.data.astype(dtype)
            p.grad = None
        for _, module in self.named_modules():
            for name, value in module._buffers.items():
                module._buffers[name] = value.astype(dtype)
        return self

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        state.update({name: b.copy() for name, b in self.named_buffers()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> None:
        own = dict(self.named_parameters())
        buffers = {
            (f"{path}.{name}" if path else name): (module, name)
            for path, module in self.named_modules()
            for name in module._buffers
        }
        expected = set(own) | set(buffers)
        missing, unexpected = expected - set(state), set(state) - expected
        if strict and (missing or unexpected):
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}")
        for name, value in state.items():
            if name in own:
                if own[name].shape != value.shape:
                    raise ShapeError(f"{name}: expected {own[name].shape}, got {value.shape}")
                own[name].data = np.array(value, dtype=own[name].dtype)
            elif name in buffers:
                module, key = buffers[name]
                module._buffers[key] = np.array(value, dtype=module._buffers[key].dtype)

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def parameter_ledger(self) -> dict[str, int]:
        """Learnable-scalar count owned directly by each module path."""
        ledger = {}
        for path, module in self.named_modules():
            own = sum(v.size for v in vars(module).values() if isinstance(v, Parameter))
            if own:
                ledger[path] = int(own)
        return ledger


class ModuleList(Module):
    def __init__(self, modules: Sequence[Module] = ()):
        super().__init__()
        for i, module in enumerate(modules):
            setattr(self, str(i), module)
        self._size = len(modules)

    def __len__(self) -> int:
        return self._size

    def __getitem__(self, index: int) -> Module:
        if not -self._size <= index < self._size:
            raise IndexError(index)
        return getattr(self, str(index % self._size))

    def __iter__(self) -> Iterator[Module]:
        return (getattr(self, str(i)) for i in range(self._size))


class Conv2d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: Optional[int] = None,
        dilation: int = 1,
        groups: int = 1,
        bias: bool = True,
    ):
        super().__init__()
        if in_channels % groups or out_channels % groups:
            raise ShapeError(f"channels {in_channels}->{out_channels} not divisible by groups={groups}")
        self.in_channels, self.out_channels = in_channels, out_channels
        self.stride, self.dilation, self.groups = stride, dilation, groups
        self.padding = dilation * (kernel_size - 1) // 2 if padding is None else padding
        fan_in = in_channels // groups * kernel_size * kernel_size
        shape = (out_channels, in_channels // groups, kernel_size, kernel_size)
        self.weight = Parameter(kaiming_uniform(shape, fan_in, rng))
        self.bias = Parameter(np.zeros(out_channels)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.dilation, self.groups)


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.weight = Parameter(trunc_normal((in_features, out_features), rng))
        self.bias = Parameter(np.zeros(out_features)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class BatchNorm2d(Module):
    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.momentum, self.eps = momentum, eps
        dtype = get_default_dtype()
        self.register_buffer("running_mean", np.zeros(channels, dtype=dtype))
        self.register_buffer("running_var", np.ones(channels, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return F.batch_norm(
            x,
            self.gamma,
            self.beta,
            self._buffers["running_mean"],
            self._buffers["running_var"],
            training=self.training,
            momentum=self.momentum,
            eps=self.eps,
        )


class LayerNorm(Module):
    """Normalizes over one axis; ``axis=1`` normalizes channels of an [N,C,H,W] map."""

    def __init__(self, channels: int, eps: float = 1e-5, axis: int = -1):
        super().__init__()
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.eps, self.axis = eps, axis

    def forward(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gamma, self.beta, self.eps, self.axis)


class ConvNormAct(Module):
    """conv -> batch norm -> activation (activation optional)."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        dilation: int = 1,
        groups: int = 1,
        act: Optional[F.ActivationKind] = "relu",
        momentum: float = 0.1,
        eps: float = 1e-5,
    ):
        super().__init__()
        self.conv = Conv2d(
            in_channels, out_channels, kernel_size, rng, stride=stride, dilation=dilation, groups=groups, bias=False
        )
        self.norm = BatchNorm2d(out_channels, momentum, eps)
        self.act = act

    def forward(self, x: Tensor) -> Tensor:
        out = self.norm(self.conv(x))
        return F.activation(out, self.act) if self.act else out


def to_channels_last(x: Tensor) -> Tensor:
    return ops.transpose(x, (0, 2, 3, 1))


def to_channels_first(x: Tensor) -> Tensor:
    return ops.transpose(x, (0, 3, 1, 2))
