"""Reverse-mode differentiation core.

A :class:`Tensor` wraps a numpy array.  Every differentiable primitive is a
:class:`Function` whose ``backward`` is itself written with Tensor operations,
so running the backward pass with ``create_graph=True`` records a second graph
that can be differentiated again (needed for input-gradient penalties).

Functions whose backward is written directly in numpy set
``double_differentiable = False``; their gradients are exact but constant with
respect to the graph, and :func:`check_graph` refuses them where a second
derivative is required.
"""

from __future__ import annotations

import contextlib
from typing import Iterable, Sequence

import numpy as np

_state = {"grad_enabled": True, "scope": None}


@contextlib.contextmanager
def no_grad():
    prev = _state["grad_enabled"]
    _state["grad_enabled"] = False
    try:
        yield
    finally:
        _state["grad_enabled"] = prev


@contextlib.contextmanager
def enable_grad(flag: bool = True):
    prev = _state["grad_enabled"]
    _state["grad_enabled"] = flag
    try:
        yield
    finally:
        _state["grad_enabled"] = prev


def is_grad_enabled() -> bool:
    return _state["grad_enabled"]


@contextlib.contextmanager
def op_scope(name: str):
    """Tag every node created inside the block with a high-level op name.

    Nested scopes keep the outermost name, so a ``linear`` built from
    ``matmul`` and ``add`` is reported as ``linear``.
    """
    prev = _state["scope"]
    if prev is None:
        _state["scope"] = name
    try:
        yield
    finally:
        _state["scope"] = prev


class Tensor:
    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if dtype is None and not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Tensor | None = None
        self._ctx: Function | None = None
        self.name = name

    # -- basic attributes -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._ctx is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        return Add.apply(self, _lift(other, self))

    def __radd__(self, other):
        return Add.apply(_lift(other, self), self)

    def __sub__(self, other):
        return Sub.apply(self, _lift(other, self))

    def __rsub__(self, other):
        return Sub.apply(_lift(other, self), self)

    def __mul__(self, other):
        return Mul.apply(self, _lift(other, self))

    def __rmul__(self, other):
        return Mul.apply(_lift(other, self), self)

    def __truediv__(self, other):
        return Div.apply(self, _lift(other, self))

    def __rtruediv__(self, other):
        return Div.apply(_lift(other, self), self)

    def __neg__(self):
        return Neg.apply(self)

    def __pow__(self, exponent: float):
        return PowScalar.apply(self, exponent=float(exponent))

    def __matmul__(self, other):
        return MatMul.apply(self, _lift(other, self))

    # -- shape / reductions -------------------------------------------------
    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return Sum.apply(self, axis=_norm_axis(axis, self.ndim), keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        axes = _norm_axis(axis, self.ndim)
        count = int(np.prod([self.shape[a] for a in axes])) if axes else 1
        return self.sum(axis=axes, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Reshape.apply(self, shape=tuple(shape))

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        return Transpose.apply(self, axes=tuple(axes))

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def swap_last(self) -> "Tensor":
        axes = list(range(self.ndim))
        axes[-1], axes[-2] = axes[-2], axes[-1]
        return self.transpose(axes)

    def broadcast_to(self, shape) -> "Tensor":
        return broadcast_to(self, shape)

    def exp(self) -> "Tensor":
        return Exp.apply(self)

    def log(self) -> "Tensor":
        return Log.apply(self)

    def sqrt(self) -> "Tensor":
        return PowScalar.apply(self, exponent=0.5)

    def tanh(self) -> "Tensor":
        return Tanh.apply(self)

    def sigmoid(self) -> "Tensor":
        return Sigmoid.apply(self)

    def relu(self) -> "Tensor":
        return LeakyReLU.apply(self, slope=0.0)

    # -- differentiation ----------------------------------------------------
    def backward(self, grad=None, create_graph: bool = False) -> None:
        if grad is None:
            if self.size != 1:
                raise ValueError(
                    f"backward() needs a scalar root, got shape {self.shape}; pass an explicit grad"
                )
            grad = Tensor(np.ones_like(self.data))
        Tape.record(self).backward(_lift(grad, self), create_graph=create_graph)


def _lift(value, like: Tensor | None = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def as_tensor(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=dtype)


def _norm_axis(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


class Function:
    """A differentiable primitive recorded on the tape."""

    name = "op"
    double_differentiable = True

    def __init__(self):
        self.inputs: tuple[Tensor, ...] = ()
        self.output: Tensor | None = None
        self.scope: str | None = None

    def forward(self, *arrays: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def backward(self, grad: Tensor) -> Sequence[Tensor | None]:  # pragma: no cover - abstract
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs: Tensor, **params) -> Tensor:
        fn = cls()
        for key, value in params.items():
            setattr(fn, key, value)
        fn.inputs = inputs
        out = Tensor(fn.forward(*(t.data for t in inputs)))
        if _state["grad_enabled"] and any(t.requires_grad for t in inputs):
            out.requires_grad = True
            out._ctx = fn
            fn.output = out
            fn.scope = _state["scope"]
        return out


class Tape:
    """Topologically ordered record of the operations reaching a root.

    Every operand precedes its result in ``nodes``.  A root that is a leaf (or
    has no recorded history) yields a tape with no operations, and replaying it
    only seeds the root's own gradient.
    """

    def __init__(self, root: Tensor, nodes: list[Tensor]):
        self.root = root
        self.nodes = nodes

    @classmethod
    def record(cls, root: Tensor) -> "Tape":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            if node._ctx is not None:
                for parent in node._ctx.inputs:
                    if parent.requires_grad and id(parent) not in seen:
                        stack.append((parent, False))
        return cls(root, order)

    @property
    def operations(self) -> list[Function]:
        return [n._ctx for n in self.nodes if n._ctx is not None]

    def __len__(self) -> int:
        return len(self.operations)

    def propagate(self, seed: Tensor, create_graph: bool = False) -> dict[int, Tensor]:
        """Return accumulated gradients keyed by ``id(tensor)``."""
        if seed.shape != self.root.shape:
            raise ValueError(f"seed gradient shape {seed.shape} != root shape {self.root.shape}")
        grads: dict[int, Tensor] = {id(self.root): seed}
        with enable_grad(create_graph):
            for node in reversed(self.nodes):
                g = grads.get(id(node))
                if g is None or node._ctx is None:
                    continue
                fn = node._ctx
                in_grads = fn.backward(g)
                for parent, pg in zip(fn.inputs, in_grads):
                    if pg is None or not parent.requires_grad:
                        continue
                    if pg.shape != parent.shape:
                        raise RuntimeError(
                            f"{fn.name}: gradient shape {pg.shape} does not match input {parent.shape}"
                        )
                    prev = grads.get(id(parent))
                    grads[id(parent)] = pg if prev is None else prev + pg
        return grads

    def backward(self, seed: Tensor, create_graph: bool = False) -> None:
        grads = self.propagate(seed, create_graph=create_graph)
        for node in self.nodes:
            if node._ctx is None and node.requires_grad and id(node) in grads:
                g = grads[id(node)]
                if not create_graph:
                    g = Tensor(g.data.astype(node.dtype, copy=False))
                node.grad = g if node.grad is None else node.grad + g


def grad(output: Tensor, inputs: Iterable[Tensor], grad_output=None, create_graph: bool = False) -> list[Tensor]:
    """Gradients of ``output`` w.r.t. ``inputs`` without touching ``.grad``.

    Inputs the output does not depend on receive zeros.
    """
    inputs = list(inputs)
    if grad_output is None:
        if output.size != 1:
            raise ValueError(f"grad() needs a scalar output, got shape {output.shape}")
        grad_output = Tensor(np.ones_like(output.data))
    grads = Tape.record(output).propagate(_lift(grad_output, output), create_graph=create_graph)
    result = []
    for t in inputs:
        g = grads.get(id(t))
        if g is None:
            g = Tensor(np.zeros_like(t.data))
        elif not create_graph:
            g = Tensor(g.data)
        result.append(g)
    return result


def check_graph(root: Tensor, allowed_scopes: set[str]) -> None:
    """Reject graphs containing ops unsuitable for double differentiation."""
    for fn in Tape.record(root).operations:
        if fn.scope is not None and fn.scope not in allowed_scopes:
            raise ValueError(f"op '{fn.scope}' is not supported for second-order differentiation")
        if not fn.double_differentiable:
            raise ValueError(f"op '{fn.scope or fn.name}' is not supported for second-order differentiation")


# ---------------------------------------------------------------------------
# primitives


def sum_to(g: Tensor, shape: tuple[int, ...]) -> Tensor:
    if g.shape == tuple(shape):
        return g
    return SumTo.apply(g, shape=tuple(shape))


def broadcast_to(t: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    if t.shape == shape:
        return t
    return BroadcastTo.apply(t, shape=shape)


class Add(Function):
    name = "add"

    def forward(self, a, b):
        return a + b

    def backward(self, g):
        a, b = self.inputs
        return sum_to(g, a.shape), sum_to(g, b.shape)


class Sub(Function):
    name = "sub"

    def forward(self, a, b):
        return a - b

    def backward(self, g):
        a, b = self.inputs
        return sum_to(g, a.shape), sum_to(-g, b.shape)


class Mul(Function):
    name = "mul"

    def forward(self, a, b):
        return a * b

    def backward(self, g):
        a, b = self.inputs
        ga = sum_to(g * b, a.shape) if a.requires_grad else None
        gb = sum_to(g * a, b.shape) if b.requires_grad else None
        return ga, gb


class Div(Function):
    name = "div"

    def forward(self, a, b):
        return a / b

    def backward(self, g):
        a, b = self.inputs
        ga = sum_to(g / b, a.shape) if a.requires_grad else None
        gb = sum_to(-g * a / (b * b), b.shape) if b.requires_grad else None
        return ga, gb


class Neg(Function):
    name = "neg"

    def forward(self, a):
        return -a

    def backward(self, g):
        return (-g,)


class PowScalar(Function):
    name = "pow"
    exponent: float

    def forward(self, a):
        return a ** self.exponent

    def backward(self, g):
        (a,) = self.inputs
        if self.exponent == 1.0:
            return (g,)
        return (g * (a ** (self.exponent - 1.0)) * self.exponent,)


class Exp(Function):
    name = "exp"

    def forward(self, a):
        return np.exp(a)

    def backward(self, g):
        return (g * self.output,)


class Log(Function):
    name = "log"

    def forward(self, a):
        return np.log(a)

    def backward(self, g):
        return (g / self.inputs[0],)


class Tanh(Function):
    name = "tanh"

    def forward(self, a):
        return np.tanh(a)

    def backward(self, g):
        y = self.output
        return (g * (1.0 - y * y),)


class Sigmoid(Function):
    name = "sigmoid"

    def forward(self, a):
        return 0.5 * (np.tanh(0.5 * a) + 1.0)

    def backward(self, g):
        y = self.output
        return (g * y * (1.0 - y),)


class LeakyReLU(Function):
    """``max(x, 0) + slope * min(x, 0)``; the derivative at 0 is taken as ``slope``."""

    name = "leaky_relu"
    slope: float

    def forward(self, a):
        self.mask = np.where(a > 0, 1.0, self.slope).astype(a.dtype)
        return a * self.mask

    def backward(self, g):
        return (g * Tensor(self.mask),)


class MatMul(Function):
    name = "matmul"

    def forward(self, a, b):
        if a.ndim < 2 or b.ndim < 2:
            raise ValueError(f"matmul needs operands with ndim >= 2, got {a.shape} and {b.shape}")
        if a.shape[-1] != b.shape[-2]:
            raise ValueError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
        return a @ b

    def backward(self, g):
        a, b = self.inputs
        ga = sum_to(g @ b.swap_last(), a.shape) if a.requires_grad else None
        gb = sum_to(a.swap_last() @ g, b.shape) if b.requires_grad else None
        return ga, gb


class Sum(Function):
    name = "sum"
    axis: tuple[int, ...]
    keepdims: bool

    def forward(self, a):
        return np.sum(a, axis=self.axis, keepdims=self.keepdims)

    def backward(self, g):
        (a,) = self.inputs
        if not self.keepdims:
            kept = list(a.shape)
            for ax in self.axis:
                kept[ax] = 1
            g = g.reshape(tuple(kept))
        return (broadcast_to(g, a.shape),)


class SumTo(Function):
    name = "sum_to"
    shape: tuple[int, ...]

    def forward(self, a):
        lead = a.ndim - len(self.shape)
        out = a.sum(axis=tuple(range(lead))) if lead > 0 else a
        axes = tuple(i for i, n in enumerate(self.shape) if n == 1 and out.shape[i] != 1)
        if axes:
            out = out.sum(axis=axes, keepdims=True)
        return out.reshape(self.shape)

    def backward(self, g):
        return (broadcast_to(g, self.inputs[0].shape),)


class BroadcastTo(Function):
    name = "broadcast_to"
    shape: tuple[int, ...]

    def forward(self, a):
        return np.broadcast_to(a, self.shape).copy()

    def backward(self, g):
        return (sum_to(g, self.inputs[0].shape),)


class Reshape(Function):
    name = "reshape"
    shape: tuple[int, ...]

    def forward(self, a):
        return a.reshape(self.shape)

    def backward(self, g):
        return (g.reshape(self.inputs[0].shape),)


class Transpose(Function):
    name = "transpose"
    axes: tuple[int, ...]

    def forward(self, a):
        return np.ascontiguousarray(np.transpose(a, self.axes))

    def backward(self, g):
        inverse = tuple(np.argsort(self.axes))
        return (g.transpose(inverse),)


def _conv_out(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


class Im2Col(Function):
    """(N, C, H, W) -> (N, C*k*k, Ho*Wo) patch matrix."""

    name = "im2col"
    kernel: int
    stride: int
    pad: int

    def forward(self, x):
        n, c, h, w = x.shape
        k, s, p = self.kernel, self.stride, self.pad
        ho, wo = _conv_out(h, k, s, p), _conv_out(w, k, s, p)
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        cols = np.empty((n, c, k, k, ho, wo), dtype=x.dtype)
        for i in range(k):
            for j in range(k):
                cols[:, :, i, j] = xp[:, :, i : i + s * ho : s, j : j + s * wo : s]
        return cols.reshape(n, c * k * k, ho * wo)

    def backward(self, g):
        x = self.inputs[0]
        return (Col2Im.apply(g, image_shape=x.shape, kernel=self.kernel, stride=self.stride, pad=self.pad),)


class Col2Im(Function):
    """Adjoint of :class:`Im2Col`: scatter-add patches back into an image."""

    name = "col2im"
    image_shape: tuple[int, int, int, int]
    kernel: int
    stride: int
    pad: int

    def forward(self, cols):
        n, c, h, w = self.image_shape
        k, s, p = self.kernel, self.stride, self.pad
        ho, wo = _conv_out(h, k, s, p), _conv_out(w, k, s, p)
        cols = cols.reshape(n, c, k, k, ho, wo)
        xp = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=cols.dtype)
        for i in range(k):
            for j in range(k):
                xp[:, :, i : i + s * ho : s, j : j + s * wo : s] += cols[:, :, i, j]
        return xp[:, :, p : p + h, p : p + w] if p else xp

    def backward(self, g):
        return (Im2Col.apply(g, kernel=self.kernel, stride=self.stride, pad=self.pad),)
