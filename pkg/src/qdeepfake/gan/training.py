"""WGAN-GP training loop with resumable state."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ..seeding import stream
from ..tensor import Tensor, nn, no_grad
from ..tensor.checkpoint import load_module, save_module
from .losses import LOSS_MODES, critic_loss, generator_loss
from .networks import Critic, Generator, sample_latent


@dataclass
class GanTrainConfig:
    steps: int = 1000
    batch_size: int = 64
    n_critic: int = 5
    lr: float = 1e-4
    beta1: float = 0.0
    beta2: float = 0.9
    lam: float = 10.0
    seed: int = 0
    loss: str = "canonical"

    def check(self) -> None:
        if self.steps < 0:
            raise ValueError(f"generator steps must be non-negative, got {self.steps}")
        if self.batch_size < 1 or self.n_critic < 1:
            raise ValueError("batch size and critic steps per generator step must be positive")
        if self.lam < 0:
            raise ValueError(f"penalty weight must be non-negative, got {self.lam}")
        if self.loss not in LOSS_MODES:
            raise ValueError(f"unknown loss mode '{self.loss}' (expected one of {LOSS_MODES})")


class GanHistoryRow(NamedTuple):
    step: int
    critic_loss: float
    generator_loss: float
    penalty: float
    grad_norm: float


@dataclass
class GanTrainer:
    """Holds the networks, both Adam states and the step counter.

    Every random draw is keyed by (seed, step, critic iteration), so a run
    resumed from a saved state continues exactly as an uninterrupted one.
    """

    data: np.ndarray
    config: GanTrainConfig
    generator: nn.Module
    critic: nn.Module
    step: int = 0
    history: list[GanHistoryRow] = field(default_factory=list)

    def __post_init__(self):
        self.config.check()
        self.data = np.asarray(self.data)
        if len(self.data) == 0:
            raise ValueError("GAN training set is empty")
        if self.data.ndim == 4 and np.any(np.abs(self.data) > 1):
            raise ValueError("GAN training images must lie in [-1, 1]")
        c = self.config
        self.g_opt = nn.Adam(self.generator.named_parameters(), lr=c.lr, betas=(c.beta1, c.beta2))
        self.c_opt = nn.Adam(self.critic.named_parameters(), lr=c.lr, betas=(c.beta1, c.beta2))

    def _latent(self, rng, n):
        dtype = next(iter(self.generator.named_parameters().values())).dtype
        return Tensor(sample_latent(rng, n, self.generator.latent_dim, dtype))

    def train_step(self) -> GanHistoryRow:
        c, k = self.config, self.step
        self.generator.train()
        parts_log = []
        for i in range(c.n_critic):
            rng = stream(c.seed, "critic", k, i)
            idx = rng.integers(0, len(self.data), c.batch_size)
            real = Tensor(self.data[idx])
            with no_grad():
                fake = self.generator(self._latent(rng, c.batch_size))
            self.c_opt.zero_grad()
            loss, parts = critic_loss(self.critic, real, fake, lam=c.lam, mode=c.loss,
                                      seed=int(rng.integers(2**31)))
            if not np.isfinite(loss.item()):
                raise FloatingPointError(f"non-finite critic loss at generator step {k} (critic iteration {i})")
            loss.backward()
            self.c_opt.step()
            parts_log.append((loss.item(), parts["penalty"], parts["grad_norm"]))
        self.g_opt.zero_grad()
        g_loss = generator_loss(self.critic, self.generator(self._latent(stream(c.seed, "generator", k), c.batch_size)),
                                mode=c.loss)
        if not np.isfinite(g_loss.item()):
            raise FloatingPointError(f"non-finite generator loss at generator step {k}")
        g_loss.backward()
        self.g_opt.step()
        self.critic.zero_grad()
        self.step += 1
        arr = np.array(parts_log)
        row = GanHistoryRow(k, float(arr[-1, 0]), g_loss.item(), float(arr[:, 1].mean()), float(arr[:, 2].mean()))
        self.history.append(row)
        return row

    def run(self, until: int | None = None) -> "GanTrainer":
        until = self.config.steps if until is None else until
        while self.step < until:
            self.train_step()
        self.generator.eval()
        return self

    # -- persistence
    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        save_module(self.generator, d / "generator")
        save_module(self.critic, d / "critic")
        for name, opt in (("g_adam", self.g_opt), ("c_adam", self.c_opt)):
            # moments stay float64 so a resumed run matches an uninterrupted one
            arrays = {f"m.{k}": v for k, v in opt.state.m.items()}
            arrays.update({f"v.{k}": v for k, v in opt.state.v.items()})
            np.savez(d / f"{name}.npz", **arrays)
        meta = {"step": self.step, "adam_steps": [self.g_opt.state.step, self.c_opt.state.step],
                "config": asdict(self.config), "history": [list(r) for r in self.history]}
        (d / "trainer.json").write_text(json.dumps(meta, indent=1) + "\n")

    def load(self, directory) -> "GanTrainer":
        d = Path(directory)
        meta = json.loads((d / "trainer.json").read_text())
        load_module(self.generator, d / "generator")
        load_module(self.critic, d / "critic")
        for name, opt, steps in (("g_adam", self.g_opt, meta["adam_steps"][0]),
                                 ("c_adam", self.c_opt, meta["adam_steps"][1])):
            with np.load(d / f"{name}.npz") as arrays:
                opt.state.m = {k[2:]: arrays[k].copy() for k in arrays.files if k.startswith("m.")}
                opt.state.v = {k[2:]: arrays[k].copy() for k in arrays.files if k.startswith("v.")}
            opt.state.step = steps
        self.step = meta["step"]
        self.history = [GanHistoryRow(*r) for r in meta["history"]]
        return self


@dataclass
class GanResult:
    generator: nn.Module
    critic: nn.Module
    history: list[GanHistoryRow]


def train_wgan_gp(data, config: GanTrainConfig | None = None, generator: nn.Module | None = None,
                  critic: nn.Module | None = None) -> GanResult:
    """Alternate ``n_critic`` critic updates with one generator update for ``config.steps`` steps."""
    config = config or GanTrainConfig()
    generator = generator or Generator(seed=config.seed)
    critic = critic or Critic(seed=config.seed, head="sigmoid" if config.loss == "paper_literal" else "linear")
    trainer = GanTrainer(data, config, generator, critic).run()
    return GanResult(trainer.generator, trainer.critic, trainer.history)
