"""Classical CNN detectors of depth 1 to 5 and the ResNet9-style sign classifier."""

from __future__ import annotations

import numpy as np

from ..seeding import stream
from ..tensor import maxpool2d, nn

CNN_WIDTHS = (32, 64, 128, 256, 512)
IMAGE_SHAPE = (3, 32, 32)


def conv_block(cin: int, cout: int, rng, pool: bool = True, dtype=np.float32) -> list[nn.Module]:
    layers = [nn.Conv2d(cin, cout, rng=rng, dtype=dtype), nn.BatchNorm2d(cout, dtype=dtype), nn.ReLU()]
    if pool:
        layers.append(nn.MaxPool2d(2))
    return layers


def flatten_dim(depth: int) -> int:
    side = IMAGE_SHAPE[1] // 2**depth
    return CNN_WIDTHS[depth - 1] * side * side


def build_classical_cnn(depth: int, seed: int = 0, dtype=np.float32) -> nn.Sequential:
    """``depth`` blocks of conv3x3 -> batchnorm -> relu -> maxpool, then dropout(0.2) and a 2-way linear head."""
    if not isinstance(depth, (int, np.integer)) or not 1 <= depth <= len(CNN_WIDTHS):
        raise ValueError(f"CNN depth must be an integer in [1, {len(CNN_WIDTHS)}], got {depth}")
    rng = stream(seed, "cnn", int(depth))
    layers, cin = [], IMAGE_SHAPE[0]
    for cout in CNN_WIDTHS[:depth]:
        layers += conv_block(cin, cout, rng, dtype=dtype)
        cin = cout
    layers += [nn.Flatten(), nn.Dropout(0.2), nn.Linear(flatten_dim(depth), 2, rng=rng, dtype=dtype)]
    return nn.Sequential(*layers)


class GlobalMaxPool(nn.Module):
    def forward(self, x):
        h, w = x.shape[2:]
        if h != w:
            raise ValueError(f"global pooling expects square maps, got {h}x{w}")
        return maxpool2d(x, h)


RESNET9_PLAN = (64, 128, 256, 512)


def build_resnet9(num_classes: int = 10, seed: int = 0, width: int = 64, dtype=np.float32) -> nn.Sequential:
    """Stem, two downsampling stages each followed by a residual pair, global max pool, linear.

    Channels are ``width * (1, 2, 4, 8)``; ``width=64`` gives the 64/128/256/512 plan.
    """
    if num_classes < 2:
        raise ValueError(f"classifier needs at least 2 classes, got {num_classes}")
    if width < 1:
        raise ValueError(f"width must be positive, got {width}")
    rng = stream(seed, "resnet9", num_classes, width)
    c1, c2, c3, c4 = (width * m for m in (1, 2, 4, 8))

    def residual(c):
        return nn.Residual(nn.Sequential(*conv_block(c, c, rng, pool=False, dtype=dtype),
                                         *conv_block(c, c, rng, pool=False, dtype=dtype)))

    return nn.Sequential(
        *conv_block(3, c1, rng, pool=False, dtype=dtype),
        *conv_block(c1, c2, rng, dtype=dtype),
        residual(c2),
        *conv_block(c2, c3, rng, dtype=dtype),
        *conv_block(c3, c4, rng, dtype=dtype),
        residual(c4),
        GlobalMaxPool(),
        nn.Flatten(),
        nn.Linear(c4, num_classes, rng=rng, dtype=dtype),
    )
