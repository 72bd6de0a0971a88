"""Trainable-parameter counts and 32-bit memory estimates."""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal

BYTES_PER_PARAM = 4
MEBIBYTE = 1_048_576


def count_params(model) -> int:
    """Trainable values of a module: layer weights and biases, batch-norm gamma/beta,
    circuit angles. Running statistics live in buffers and are not counted."""
    return int(sum(p.size for p in model.named_parameters().values()))


def dense_param_count(sizes) -> int:
    """Closed form for a fully connected stack with biases: sum of (n_i + 1) n_{i+1}."""
    sizes = list(sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError(f"need at least two positive layer sizes, got {sizes}")
    return sum((a + 1) * b for a, b in zip(sizes[:-1], sizes[1:]))


def memory_mb(n_params: int) -> float:
    """4 bytes per parameter in MiB, rounded half-up to 3 decimals."""
    if n_params < 0:
        raise ValueError(f"parameter count must be non-negative, got {n_params}")
    exact = Decimal(BYTES_PER_PARAM * int(n_params)) / Decimal(MEBIBYTE)
    return float(exact.quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))
