"""Hybrid detector: 32 amplitude-encoded QCNN circuits feeding a small tanh head.

Every circuit reads the same encoded image and contributes one neuron, the
Pauli-Z expectation of its readout qubit, so the head input is always inside
[-1, 1]^32.
"""

from __future__ import annotations

import numpy as np

from ..quantum import DEFAULT_TOPOLOGY, FunnelEvaluator, QcnnParams, qcnn_grad_fd, qcnn_grad_shift
from ..seeding import stream
from ..tensor import Function, Tensor, activation, is_grad_enabled, nn, op_scope

N_CIRCUITS = 32
HIDDEN = 120
PIXELS = 3 * 32 * 32
GRAD_METHODS = ("analytic", "fd", "shift")

_EVALUATOR: FunnelEvaluator | None = None


def _evaluator() -> FunnelEvaluator:
    global _EVALUATOR
    if _EVALUATOR is None:
        _EVALUATOR = FunnelEvaluator(DEFAULT_TOPOLOGY)
    return _EVALUATOR


class CircuitBank(Function):
    """(C, P) circuit angles -> (N, C) expectations for a fixed image batch.

    The image batch is a constant of the op. ``method`` picks how the angle
    gradient is formed: the analytic adjoint of the fused evaluator, per-angle
    central differences, or the parameter-shift rule. All three give plain
    arrays, so this op does not support second-order differentiation.
    """

    name = "qcnn"
    double_differentiable = False
    pixels: np.ndarray
    method: str
    keep: bool

    def forward(self, angles):
        out, self.cache = _evaluator().forward(self.pixels, angles, keep=self.keep)
        return out.T

    def backward(self, g):
        weights = np.ascontiguousarray(g.data.T, dtype=np.float64)
        angles = self.inputs[0].data
        if self.method == "analytic":
            grad = _evaluator().backward(self.cache, weights)
        else:
            rule = qcnn_grad_fd if self.method == "fd" else qcnn_grad_shift
            grad = np.zeros_like(angles)
            for c in range(angles.shape[0]):
                for n in range(self.pixels.shape[0]):
                    if weights[c, n] != 0:
                        grad[c] += weights[c, n] * rule(self.pixels[n], angles[c])
        return (Tensor(grad.astype(angles.dtype)),)


class HybridDetector(nn.Module):
    def __init__(self, seed: int = 0, grad_method: str = "analytic", n_circuits: int = N_CIRCUITS,
                 hidden: int = HIDDEN):
        if grad_method not in GRAD_METHODS:
            raise ValueError(f"unknown gradient method '{grad_method}' (expected one of {GRAD_METHODS})")
        self.grad_method = grad_method
        rows = [QcnnParams.random(stream(seed, "hybrid", "circuit", c)).flat() for c in range(n_circuits)]
        self.angles = nn.Parameter(np.stack(rows), dtype=np.float64)
        rng = stream(seed, "hybrid", "head")
        self.fc1 = nn.Linear(n_circuits, hidden, rng=rng, dtype=np.float64)
        self.fc2 = nn.Linear(hidden, 2, rng=rng, dtype=np.float64)

    @property
    def n_circuits(self) -> int:
        return self.angles.shape[0]

    def neurons(self, pixels) -> Tensor:
        """(N, C) circuit expectations."""
        x = _flat_pixels(pixels)
        keep = is_grad_enabled() and self.angles.requires_grad and self.grad_method == "analytic"
        with op_scope("qcnn"):
            return CircuitBank.apply(self.angles, pixels=x, method=self.grad_method, keep=keep)

    def head(self, neurons: Tensor) -> Tensor:
        return self.fc2(activation("tanh", self.fc1(neurons)))

    def forward(self, x):
        return hybrid_forward(self, x)


def _flat_pixels(pixels) -> np.ndarray:
    x = pixels.data if isinstance(pixels, Tensor) else np.asarray(pixels)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None]
    if x.shape[0] == 0:
        raise ValueError("hybrid forward needs at least one image")
    x = x.reshape(x.shape[0], -1)
    if x.shape[1] != PIXELS:
        raise ValueError(f"each image must have {PIXELS} values, got {x.shape[1]}")
    zero = np.flatnonzero(~x.any(axis=1))
    if zero.size:
        raise ValueError(f"image {zero[0]} is all zero; amplitude encoding is undefined")
    return x


def build_hybrid(seed: int = 0, grad_method: str = "analytic") -> HybridDetector:
    return HybridDetector(seed=seed, grad_method=grad_method)


def hybrid_forward(model: HybridDetector, pixels) -> Tensor:
    """(N, 2) logits: circuits -> linear 32->120 -> tanh -> linear 120->2."""
    return model.head(model.neurons(pixels))
