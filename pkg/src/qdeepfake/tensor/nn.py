"""Layer objects holding parameters, plus a small Module container."""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from . import functional as F
from .engine import Tensor


class Parameter(Tensor):
    def __init__(self, data, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)


class Module:
    """Base class; parameters, buffers and submodules are found by attribute order."""

    training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):  # pragma: no cover - abstract
        raise NotImplementedError

    def children(self):
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "") -> "OrderedDict[str, Tensor]":
        out: OrderedDict[str, Tensor] = OrderedDict()
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                out[prefix + name] = value
        for name, child in self.children():
            out.update(child.named_parameters(prefix + name + "."))
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def named_buffers(self, prefix: str = "") -> "OrderedDict[str, np.ndarray]":
        out: OrderedDict[str, np.ndarray] = OrderedDict()
        for name, value in getattr(self, "_buffers", {}).items():
            out[prefix + name] = value
        for name, child in self.children():
            out.update(child.named_buffers(prefix + name + "."))
        return out

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        state = OrderedDict((k, v.data.copy()) for k, v in self.named_parameters().items())
        state.update((k, v.copy()) for k, v in self.named_buffers().items())
        return state

    def load_state_dict(self, state) -> None:
        params = self.named_parameters()
        buffers = self.named_buffers()
        missing = [k for k in list(params) + list(buffers) if k not in state]
        if missing:
            raise KeyError(f"state is missing entries: {', '.join(missing)}")
        for k, p in params.items():
            if state[k].shape != p.shape:
                raise ValueError(f"shape mismatch for '{k}': {state[k].shape} vs {p.shape}")
            p.data = np.array(state[k], dtype=p.dtype)
        for k, b in buffers.items():
            b[...] = state[k]

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))


def he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def xavier_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def _init(rng, shape, fan_in, fan_out, init, dtype):
    if init == "he":
        return he_uniform(rng, shape, fan_in, dtype)
    if init == "xavier":
        return xavier_uniform(rng, shape, fan_in, fan_out, dtype)
    raise ValueError(f"unknown init '{init}'")


class Conv2d(Module):
    def __init__(self, cin, cout, kernel=3, stride=1, padding=1, *, rng, init="he", dtype=np.float32):
        fan_in, fan_out = cin * kernel * kernel, cout * kernel * kernel
        self.weight = Parameter(_init(rng, (cout, cin, kernel, kernel), fan_in, fan_out, init, dtype))
        self.bias = Parameter(np.zeros(cout, dtype=dtype))
        self.stride, self.padding = stride, padding

    def forward(self, x):
        return F.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class ConvTranspose2d(Module):
    def __init__(self, cin, cout, kernel=4, stride=2, padding=1, *, rng, init="he", dtype=np.float32):
        fan_in = cin * kernel * kernel // (stride * stride)
        fan_out = cout * kernel * kernel
        self.weight = Parameter(_init(rng, (cin, cout, kernel, kernel), fan_in, fan_out, init, dtype))
        self.bias = Parameter(np.zeros(cout, dtype=dtype))
        self.stride, self.padding = stride, padding

    def forward(self, x):
        return F.conv_transpose2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class Linear(Module):
    def __init__(self, fin, fout, *, rng, init="xavier", dtype=np.float32):
        self.weight = Parameter(_init(rng, (fin, fout), fin, fout, init, dtype))
        self.bias = Parameter(np.zeros(fout, dtype=dtype))

    def forward(self, x):
        return F.linear(x, self.weight, self.bias)


class BatchNorm2d(Module):
    def __init__(self, channels, momentum=0.1, eps=1e-5, dtype=np.float32):
        self.weight = Parameter(np.ones(channels, dtype=dtype))
        self.bias = Parameter(np.zeros(channels, dtype=dtype))
        self._buffers = OrderedDict(
            running_mean=np.zeros(channels, dtype=dtype),
            running_var=np.ones(channels, dtype=dtype),
        )
        self.momentum, self.eps = momentum, eps

    @property
    def state(self) -> F.BatchNormState:
        return F.BatchNormState(
            gamma=self.weight,
            beta=self.bias,
            running_mean=self._buffers["running_mean"],
            running_var=self._buffers["running_var"],
            momentum=self.momentum,
            eps=self.eps,
            mode="train" if self.training else "eval",
        )

    def forward(self, x):
        return F.batchnorm2d(x, self.state)


class Activation(Module):
    def __init__(self, kind: str):
        self.kind = kind

    def forward(self, x):
        return F.activation(self.kind, x)


def ReLU():
    return Activation("relu")


def Tanh():
    return Activation("tanh")


def LeakyReLU():
    return Activation("leaky_relu")


def Sigmoid():
    return Activation("sigmoid")


class MaxPool2d(Module):
    def __init__(self, window=2):
        self.window = window

    def forward(self, x):
        return F.maxpool2d(x, self.window)


class Dropout(Module):
    """Inverted dropout; each train-mode call draws a fresh mask from ``(seed, call index)``."""

    def __init__(self, p=0.2, seed=0):
        self.p, self.seed, self.calls = p, seed, 0

    def reseed(self, seed: int) -> None:
        self.seed, self.calls = seed, 0

    def forward(self, x):
        if not self.training:
            return F.dropout(x, self.p, mode="eval")
        self.calls += 1
        return F.dropout(x, self.p, mode="train", seed=self.seed * 1_000_003 + self.calls)


class Flatten(Module):
    def forward(self, x):
        return F.flatten(x)


class Reshape(Module):
    def __init__(self, *shape):
        self.shape = shape

    def forward(self, x):
        return x.reshape(x.shape[0], *self.shape)


class Sequential(Module):
    def __init__(self, *layers: Module):
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x

    def __getitem__(self, i):
        return self.layers[i]

    def __len__(self):
        return len(self.layers)


class Residual(Module):
    """``x + block(x)``; the block must preserve shape."""

    def __init__(self, block: Module):
        self.block = block

    def forward(self, x):
        y = self.block(x)
        if y.shape != x.shape:
            raise ValueError(f"residual block changed shape {x.shape} -> {y.shape}")
        return x + y


class Adam:
    """Adam over a module's named parameters, reading ``p.grad``."""

    def __init__(self, params: "OrderedDict[str, Tensor] | dict", lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = OrderedDict(params)
        self.state = F.AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        grads = {}
        for name, p in self.params.items():
            if p.grad is not None:
                grads[name] = p.grad.data
        F.adam_step({k: p.data for k, p in self.params.items()}, grads, self.state)
