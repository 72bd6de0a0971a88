"""Generator and critic networks.

The full-size pair works on 3 x 32 x 32 images: the generator projects a
latent vector to 256 x 4 x 4 and upsamples through three stride-2 transposed
convolutions; the critic downsamples through three stride-2 convolutions
with leaky ReLU and no normalisation. ``width`` scales every channel count.
The MLP pair is for miniature problems (2-D toys, small images).
"""

from __future__ import annotations

import numpy as np

from ..seeding import stream
from ..tensor import Tensor, nn

LATENT_DIM = 100
IMAGE_SHAPE = (3, 32, 32)


class Generator(nn.Module):
    def __init__(self, latent_dim: int = LATENT_DIM, width: float = 1.0, seed: int = 0, dtype=np.float32):
        rng = stream(seed, "generator")
        c = [max(1, int(round(k * width))) for k in (256, 128, 64)]
        self.latent_dim, self.width = latent_dim, width
        self.out_shape = IMAGE_SHAPE
        self.net = nn.Sequential(
            nn.Linear(latent_dim, c[0] * 16, rng=rng, init="he", dtype=dtype),
            nn.Reshape(c[0], 4, 4),
            nn.BatchNorm2d(c[0], dtype=dtype),
            nn.ReLU(),
            nn.ConvTranspose2d(c[0], c[1], rng=rng, dtype=dtype),
            nn.BatchNorm2d(c[1], dtype=dtype),
            nn.ReLU(),
            nn.ConvTranspose2d(c[1], c[2], rng=rng, dtype=dtype),
            nn.BatchNorm2d(c[2], dtype=dtype),
            nn.ReLU(),
            nn.ConvTranspose2d(c[2], 3, rng=rng, init="xavier", dtype=dtype),
            nn.Tanh(),
        )

    def forward(self, z):
        return self.net(_check_latent(z, self.latent_dim))


class Critic(nn.Module):
    def __init__(self, width: float = 1.0, seed: int = 0, head: str = "linear", dtype=np.float32):
        rng = stream(seed, "critic")
        c = [max(1, int(round(k * width))) for k in (64, 128, 256)]
        layers, cin = [], IMAGE_SHAPE[0]
        for cout in c:
            layers += [nn.Conv2d(cin, cout, kernel=4, stride=2, padding=1, rng=rng, dtype=dtype), nn.LeakyReLU()]
            cin = cout
        layers += [nn.Flatten(), nn.Linear(c[-1] * 16, 1, rng=rng, dtype=dtype)]
        self.net = nn.Sequential(*layers, *_head(head))
        self.head = head

    def forward(self, x):
        return self.net(x).reshape(-1)


class MlpGenerator(nn.Module):
    """latent -> hidden (relu) -> prod(out_shape), optionally tanh-squashed."""

    def __init__(self, latent_dim: int = 2, out_shape=(2,), hidden=(64, 64), squash: bool = True, seed: int = 0,
                 dtype=np.float64):
        rng = stream(seed, "mlp-generator")
        self.latent_dim, self.out_shape = latent_dim, tuple(out_shape)
        sizes = [latent_dim, *hidden, int(np.prod(out_shape))]
        layers = []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == len(sizes) - 2
            layers.append(nn.Linear(a, b, rng=rng, init="xavier" if last else "he", dtype=dtype))
            if not last:
                layers.append(nn.ReLU())
        if squash:
            layers.append(nn.Tanh())
        if len(self.out_shape) > 1:
            layers.append(nn.Reshape(*self.out_shape))
        self.net = nn.Sequential(*layers)

    def forward(self, z):
        return self.net(_check_latent(z, self.latent_dim))


class MlpCritic(nn.Module):
    def __init__(self, in_dim: int = 2, hidden=(64, 64), seed: int = 0, head: str = "linear", dtype=np.float64):
        rng = stream(seed, "mlp-critic")
        sizes = [in_dim, *hidden, 1]
        layers: list[nn.Module] = [nn.Flatten()]
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            layers.append(nn.Linear(a, b, rng=rng, dtype=dtype))
            if i < len(sizes) - 2:
                layers.append(nn.LeakyReLU())
        self.net = nn.Sequential(*layers, *_head(head))
        self.head = head

    def forward(self, x):
        return self.net(x).reshape(-1)


def _head(head: str) -> list[nn.Module]:
    if head == "linear":
        return []
    if head == "sigmoid":
        return [nn.Sigmoid()]
    raise ValueError(f"unknown critic head '{head}' (expected 'linear' or 'sigmoid')")


def _check_latent(z, latent_dim: int) -> Tensor:
    z = z if isinstance(z, Tensor) else Tensor(np.asarray(z))
    if z.ndim != 2 or z.shape[1] != latent_dim:
        raise ValueError(f"latent batch must be N x {latent_dim}, got shape {z.shape}")
    return z


def generator_forward(generator: nn.Module, z) -> Tensor:
    """Images for a latent batch; output values lie in [-1, 1] for squashed generators."""
    return generator(z)


def sample_latent(rng: np.random.Generator, n: int, latent_dim: int, dtype=np.float32) -> np.ndarray:
    return rng.standard_normal((n, latent_dim)).astype(dtype)
