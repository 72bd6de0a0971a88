"""Network-level operations built from the engine primitives."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..seeding import stream
from .engine import (
    Col2Im,
    Im2Col,
    LeakyReLU,
    Tensor,
    _conv_out,
    as_tensor,
    check_graph,
    grad,
    op_scope,
)

CRITIC_OPS = {"conv2d", "linear", "leaky_relu", "relu", "tanh", "sigmoid", "flatten", "sum", "mean"}


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 1) -> Tensor:
    """Cross-correlation of an N x Cin x H x W batch with Cout x Cin x k x k kernels."""
    if x.ndim != 4:
        raise ValueError(f"conv2d input must be N x C x H x W, got shape {x.shape}")
    if weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
        raise ValueError(f"conv2d weight must be Cout x Cin x k x k, got shape {weight.shape}")
    n, cin, h, w = x.shape
    cout, wcin, k, _ = weight.shape
    if wcin != cin:
        raise ValueError(f"conv2d channel mismatch: input has Cin={cin}, weight expects Cin={wcin}")
    if bias is not None and bias.shape != (cout,):
        raise ValueError(f"conv2d bias must have Cout={cout} entries, got shape {bias.shape}")
    ho, wo = _conv_out(h, k, stride, padding), _conv_out(w, k, stride, padding)
    if ho < 1 or wo < 1:
        raise ValueError(f"conv2d spatial size {h}x{w} too small for kernel {k}")
    with op_scope("conv2d"):
        cols = Im2Col.apply(x, kernel=k, stride=stride, pad=padding)
        out = weight.reshape(cout, cin * k * k) @ cols
        if bias is not None:
            out = out + bias.reshape(cout, 1)
        return out.reshape(n, cout, ho, wo)


def conv_transpose2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 2, padding: int = 1) -> Tensor:
    """Transposed convolution; ``weight`` is Cin x Cout x k x k."""
    if x.ndim != 4:
        raise ValueError(f"conv_transpose2d input must be N x C x H x W, got shape {x.shape}")
    n, cin, h, w = x.shape
    wcin, cout, k, _ = weight.shape
    if wcin != cin:
        raise ValueError(f"conv_transpose2d channel mismatch: input has Cin={cin}, weight expects Cin={wcin}")
    ho = (h - 1) * stride - 2 * padding + k
    wo = (w - 1) * stride - 2 * padding + k
    with op_scope("conv_transpose2d"):
        cols = weight.reshape(cin, cout * k * k).swap_last() @ x.reshape(n, cin, h * w)
        out = Col2Im.apply(cols, image_shape=(n, cout, ho, wo), kernel=k, stride=stride, pad=padding)
        if bias is not None:
            out = out + bias.reshape(1, cout, 1, 1)
        return out


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` with ``weight`` stored as F x O."""
    if x.ndim != 2 or weight.ndim != 2:
        raise ValueError(f"linear expects N x F input and F x O weight, got {x.shape} and {weight.shape}")
    if x.shape[1] != weight.shape[0]:
        raise ValueError(f"linear dimension mismatch: input has F={x.shape[1]}, weight has F={weight.shape[0]}")
    if bias is not None and bias.shape != (weight.shape[1],):
        raise ValueError(f"linear bias must have O={weight.shape[1]} entries, got shape {bias.shape}")
    with op_scope("linear"):
        out = x @ weight
        return out + bias if bias is not None else out


def flatten(x: Tensor) -> Tensor:
    with op_scope("flatten"):
        return x.reshape(x.shape[0], -1)


def activation(kind: str, x: Tensor) -> Tensor:
    if kind == "relu":
        with op_scope("relu"):
            return LeakyReLU.apply(x, slope=0.0)
    if kind == "leaky_relu":
        with op_scope("leaky_relu"):
            return LeakyReLU.apply(x, slope=0.2)
    if kind == "tanh":
        with op_scope("tanh"):
            return x.tanh()
    if kind == "sigmoid":
        with op_scope("sigmoid"):
            return x.sigmoid()
    raise ValueError(f"unknown activation '{kind}'")


def relu(x: Tensor) -> Tensor:
    return activation("relu", x)


def tanh(x: Tensor) -> Tensor:
    return activation("tanh", x)


def leaky_relu(x: Tensor) -> Tensor:
    return activation("leaky_relu", x)


@dataclass
class BatchNormState:
    gamma: Tensor
    beta: Tensor
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5
    mode: str = "train"

    @classmethod
    def create(cls, channels: int, dtype=np.float32, **kw) -> "BatchNormState":
        return cls(
            gamma=Tensor(np.ones(channels, dtype=dtype), requires_grad=True),
            beta=Tensor(np.zeros(channels, dtype=dtype), requires_grad=True),
            running_mean=np.zeros(channels, dtype=dtype),
            running_var=np.ones(channels, dtype=dtype),
            **kw,
        )


def batchnorm2d(x: Tensor, state: BatchNormState) -> Tensor:
    """Per-channel normalisation of an N x C x H x W batch.

    Train mode uses biased batch variance for normalisation and folds the
    unbiased estimate into ``running_var``.
    """
    if x.ndim != 4 or x.shape[1] != state.gamma.shape[0]:
        raise ValueError(f"batchnorm2d expects N x {state.gamma.shape[0]} x H x W, got {x.shape}")
    c = x.shape[1]
    with op_scope("batchnorm2d"):
        if state.mode == "train":
            count = x.shape[0] * x.shape[2] * x.shape[3]
            if count < 2:
                raise ValueError("batchnorm2d in train mode needs at least 2 values per channel")
            mean = x.mean(axis=(0, 2, 3), keepdims=True)
            centred = x - mean
            var = (centred * centred).mean(axis=(0, 2, 3), keepdims=True)
            xhat = centred / (var + state.eps).sqrt()
            m = state.momentum
            batch_var = var.data.reshape(c) * (count / (count - 1))
            state.running_mean[:] = (1 - m) * state.running_mean + m * mean.data.reshape(c)
            state.running_var[:] = (1 - m) * state.running_var + m * batch_var
        elif state.mode == "eval":
            mean = Tensor(state.running_mean.reshape(1, c, 1, 1).astype(x.dtype))
            inv = Tensor((1.0 / np.sqrt(state.running_var + state.eps)).reshape(1, c, 1, 1).astype(x.dtype))
            xhat = (x - mean) * inv
        else:
            raise ValueError(f"unknown batchnorm mode '{state.mode}'")
        return xhat * state.gamma.reshape(1, c, 1, 1) + state.beta.reshape(1, c, 1, 1)


def maxpool2d(x: Tensor, window: int = 2) -> Tensor:
    """Non-overlapping max pooling; ties go to the first cell in row-major order."""
    if x.ndim != 4:
        raise ValueError(f"maxpool2d expects N x C x H x W, got {x.shape}")
    n, c, h, w = x.shape
    if h % window or w % window:
        raise ValueError(f"maxpool2d needs spatial extent divisible by {window}, got {h}x{w}")
    ho, wo = h // window, w // window
    with op_scope("maxpool2d"):
        blocks = x.reshape(n, c, ho, window, wo, window).transpose(0, 1, 2, 4, 3, 5)
        blocks = blocks.reshape(n, c, ho, wo, window * window)
        idx = np.argmax(blocks.data, axis=-1)
        mask = np.zeros(blocks.shape, dtype=x.dtype)
        np.put_along_axis(mask, idx[..., None], 1.0, axis=-1)
        return (blocks * Tensor(mask)).sum(axis=-1)


def dropout(x: Tensor, p: float = 0.2, mode: str = "train", seed: int = 0) -> Tensor:
    """Inverted dropout: survivors are scaled by ``1 / (1 - p)`` at train time."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must satisfy 0 <= p < 1, got {p}")
    if mode == "eval" or p == 0.0:
        return x
    keep = stream(seed, "dropout").random(x.shape) >= p
    with op_scope("dropout"):
        return x * Tensor((keep / (1.0 - p)).astype(x.dtype))


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean softmax cross-entropy over the batch."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2:
        raise ValueError(f"cross_entropy expects N x K logits, got {logits.shape}")
    n, k = logits.shape
    if k < 2:
        raise ValueError("cross_entropy needs at least two classes")
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k}), got range [{labels.min()}, {labels.max()}]")
    with op_scope("cross_entropy"):
        shifted = logits - Tensor(logits.data.max(axis=1, keepdims=True))
        lse = shifted.exp().sum(axis=1).log()
        onehot = np.zeros((n, k), dtype=logits.dtype)
        onehot[np.arange(n), labels] = 1.0
        picked = (shifted * Tensor(onehot)).sum(axis=1)
        return (lse - picked).mean()


def input_grad_norm(critic_eval, x_hat) -> Tensor:
    """Per-sample L2 norm of the critic's gradient w.r.t. its input.

    The returned tensor stays on a second-order graph, so a scalar built from
    it can be differentiated w.r.t. the critic parameters.
    """
    x = Tensor(as_tensor(x_hat).data, requires_grad=True)
    out = critic_eval(x)
    check_graph(out, CRITIC_OPS)
    (g,) = grad(out.sum(), [x], create_graph=True)
    axes = tuple(range(1, g.ndim))
    return ((g * g).sum(axis=axes) + 1e-12).sqrt()


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> None:
    """One bias-corrected Adam update applied to ``params`` in place."""
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter '{name}'")
        if g.shape != params[name].shape:
            raise ValueError(f"gradient for '{name}' has shape {g.shape}, parameter has {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter '{name}'")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name, g in grads.items():
        p = params[name]
        g64 = g.astype(np.float64)
        m = state.m.setdefault(name, np.zeros(p.shape, dtype=np.float64))
        v = state.v.setdefault(name, np.zeros(p.shape, dtype=np.float64))
        m *= state.beta1
        m += (1.0 - state.beta1) * g64
        v *= state.beta2
        v += (1.0 - state.beta2) * (g64 * g64)
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        p -= update.astype(p.dtype)
