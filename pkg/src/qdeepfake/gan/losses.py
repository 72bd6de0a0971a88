"""WGAN-GP objectives.

``canonical``: critic loss = mean D(G(z)) - mean D(x) + lambda * penalty,
generator loss = -mean D(G(z)).
``paper_literal``: critic loss = -(mean log D(x) - mean log D(G(z))) + lambda * penalty,
generator loss = -mean log D(G(z)); D must be strictly positive, which a
sigmoid critic head guarantees.
"""

from __future__ import annotations

import numpy as np

from ..seeding import stream
from ..tensor import Tensor, input_grad_norm

LOSS_MODES = ("canonical", "paper_literal")


def interpolate(x, g, t):
    """t * g + (1 - t) * x elementwise; ``t`` is a scalar or one value per sample."""
    t_arr = np.asarray(t.data if isinstance(t, Tensor) else t, dtype=np.float64)
    if np.any(t_arr < 0) or np.any(t_arr > 1) or np.any(np.isnan(t_arr)):
        raise ValueError(f"interpolation weight must lie in [0, 1], got {t_arr.min():g}..{t_arr.max():g}")
    xs, gs = (v.shape for v in (x, g))
    if xs != gs:
        raise ValueError(f"interpolation needs equal shapes, got {xs} and {gs}")
    if t_arr.ndim == 1:
        t_arr = t_arr.reshape((-1,) + (1,) * (len(xs) - 1))
    if isinstance(x, Tensor) or isinstance(g, Tensor):
        x = x if isinstance(x, Tensor) else Tensor(x)
        g = g if isinstance(g, Tensor) else Tensor(g)
        tt = Tensor(t_arr.astype(x.dtype))
        return tt * g + (1.0 - tt) * x
    x, g = np.asarray(x), np.asarray(g)
    t_arr = t_arr.astype(np.result_type(x, g))
    return t_arr * g + (1 - t_arr) * x


def gradient_penalty(critic, x, g, seed: int, return_norms: bool = False):
    """mean over the batch of (||grad_xhat D(xhat)||_2 - 1)^2, xhat = interpolate(x, g, t), t ~ U[0, 1].

    The critic must be built from double-differentiable ops. Lambda is applied
    by the caller.
    """
    x = x.data if isinstance(x, Tensor) else np.asarray(x)
    g = g.data if isinstance(g, Tensor) else np.asarray(g)
    t = stream(seed, "penalty").random(len(x))
    x_hat = interpolate(x, g, t)
    norms = input_grad_norm(critic, Tensor(x_hat))
    penalty = ((norms - 1.0) ** 2).mean()
    return (penalty, norms) if return_norms else penalty


def _log_positive(d: Tensor, what: str) -> Tensor:
    if np.any(d.data <= 0):
        raise ValueError(
            f"paper_literal loss takes log D({what}) but the critic produced non-positive values "
            f"(min {d.data.min():.3g}); use a sigmoid-squashed critic head in this mode"
        )
    return d.log()


def critic_loss(critic, real, fake, lam: float = 10.0, mode: str = "canonical", seed: int = 0):
    """Returns (loss, parts) with parts = wasserstein / log term, penalty, mean gradient norm."""
    if mode not in LOSS_MODES:
        raise ValueError(f"unknown loss mode '{mode}' (expected one of {LOSS_MODES})")
    fake = fake.detach() if isinstance(fake, Tensor) else Tensor(fake)
    real = real if isinstance(real, Tensor) else Tensor(real)
    d_real, d_fake = critic(real), critic(fake)
    if mode == "canonical":
        adversarial = d_fake.mean() - d_real.mean()
    else:
        adversarial = _log_positive(d_fake, "G(z)").mean() - _log_positive(d_real, "x").mean()
    if lam:
        penalty, norms = gradient_penalty(critic, real.data, fake.data, seed, return_norms=True)
        loss = adversarial + lam * penalty
    else:
        penalty, norms = None, None
        loss = adversarial
    parts = {
        "adversarial": adversarial.item(),
        "penalty": 0.0 if penalty is None else penalty.item(),
        "grad_norm": float("nan") if norms is None else float(norms.data.mean()),
    }
    return loss, parts


def generator_loss(critic, fake, mode: str = "canonical") -> Tensor:
    if mode not in LOSS_MODES:
        raise ValueError(f"unknown loss mode '{mode}' (expected one of {LOSS_MODES})")
    d_fake = critic(fake)
    if mode == "canonical":
        return -d_fake.mean()
    return -_log_positive(d_fake, "G(z)").mean()
