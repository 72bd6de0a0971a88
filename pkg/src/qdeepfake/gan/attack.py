"""Latent-space attack: find z maximising ||G(z) - x||^2 for a real image x.

Each restart starts from its own seeded normal draw and runs Adam ascent on z.
Restart r always uses the stream (seed, "attack", r), so a run with more
restarts evaluates a superset of the starts of a run with fewer, and the
best objective can only grow with the restart count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..seeding import stream
from ..tensor import AdamState, Tensor, adam_step, grad, nn


@dataclass
class AttackConfig:
    restarts: int = 8
    steps: int = 50
    step_size: float = 0.05
    seed: int = 0

    def check(self) -> None:
        if self.restarts < 1:
            raise ValueError(f"attack needs at least one restart, got {self.restarts}")
        if self.steps < 0:
            raise ValueError(f"ascent steps must be non-negative, got {self.steps}")
        if not self.step_size > 0:
            raise ValueError(f"step size must be positive, got {self.step_size}")


@dataclass
class AttackResult:
    z: np.ndarray
    image: np.ndarray
    objective: float
    restart: int
    objectives: np.ndarray


def objective(generator: nn.Module, z, x) -> np.ndarray:
    """||G(z_r) - x||^2 for every row z_r, evaluated in float64."""
    was = generator.training
    generator.eval()
    try:
        g = generator(Tensor(np.asarray(z, dtype=_dtype(generator)))).data.astype(np.float64)
    finally:
        generator.train(was)
    diff = g - np.asarray(x, dtype=np.float64)[None]
    return (diff * diff).reshape(len(g), -1).sum(axis=1)


def objective_bound(x) -> float:
    """Upper bound sum (|x_i| + 1)^2 for generators with outputs in [-1, 1]."""
    return float(((np.abs(np.asarray(x, dtype=np.float64)) + 1) ** 2).sum())


def _dtype(generator):
    return next(iter(generator.named_parameters().values())).dtype


def attack(x, generator: nn.Module, config: AttackConfig | None = None) -> AttackResult:
    """Best restart's (z*, G(z*), objective); ties go to the lower restart index."""
    config = config or AttackConfig()
    config.check()
    x = np.asarray(x)
    dtype = _dtype(generator)
    z = np.stack([stream(config.seed, "attack", r).standard_normal(generator.latent_dim)
                  for r in range(config.restarts)]).astype(dtype)
    target = Tensor(x.astype(dtype)[None])
    was = generator.training
    generator.eval()
    try:
        # one restart per batch: results then do not depend on how many restarts run
        for r in range(config.restarts):
            zr = z[r : r + 1]
            state = AdamState(lr=config.step_size)
            for _ in range(config.steps):
                zt = Tensor(zr, requires_grad=True)
                diff = generator(zt) - target
                (g,) = grad((diff * diff).sum(), [zt])
                adam_step({"z": zr}, {"z": -g.data}, state)
    finally:
        generator.train(was)
    scores = np.concatenate([objective(generator, z[r : r + 1], x) for r in range(config.restarts)])
    best = int(np.lexsort((np.arange(len(scores)), -scores))[0])
    image = objective_image(generator, z[best : best + 1])
    return AttackResult(z[best].copy(), image, float(scores[best]), best, scores)


def objective_image(generator: nn.Module, z) -> np.ndarray:
    was = generator.training
    generator.eval()
    try:
        return generator(Tensor(z)).data[0].copy()
    finally:
        generator.train(was)
