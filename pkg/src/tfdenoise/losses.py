"""Adversarial, L1 and discriminator-feature losses."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .autodiff import Tensor, clamp, mean, tabs
from .errors import LengthMismatch, ScoreOutOfRange, ShapeMismatch

SCORE_EPS = 1e-7


def _score(s, dtype=np.float64) -> Tensor:
    t = s if isinstance(s, Tensor) else Tensor(np.asarray(s, dtype=dtype))
    v = t.data
    if not np.all(np.isfinite(v)) or np.any(v < 0.0) or np.any(v > 1.0):
        raise ScoreOutOfRange(f"discriminator score {v} outside [0, 1]")
    return clamp(t, SCORE_EPS, 1.0 - SCORE_EPS)


def adv_loss_d(d_real, d_fake) -> Tensor:
    """-[log D(x, y) + log(1 - D(x_hat, y))]; the discriminator minimizes this."""
    real, fake = _score(d_real), _score(d_fake)
    return -(real.log() + (1.0 - fake).log())


def adv_loss_g(d_fake, saturating: bool = False) -> Tensor:
    """Generator side. Default is the non-saturating -log D(x_hat, y);
    ``saturating=True`` gives the literal minimax term log(1 - D(x_hat, y))."""
    fake = _score(d_fake)
    if saturating:
        return (1.0 - fake).log()
    return -fake.log()


def _as_tensor(a) -> Tensor:
    return a if isinstance(a, Tensor) else Tensor(np.asarray(a, dtype=np.float64))


def l1_loss(x, x_hat) -> Tensor:
    x, x_hat = _as_tensor(x), _as_tensor(x_hat)
    if x.shape != x_hat.shape:
        raise ShapeMismatch(f"l1_loss: {x.shape} vs {x_hat.shape}")
    return mean(tabs(x - x_hat))


def perceptual_loss(features_real: Sequence, features_fake: Sequence,
                    lambda_n: Sequence[float]) -> Tensor:
    """Weighted sum over layers of the mean absolute feature difference."""
    if not (len(features_real) == len(features_fake) == len(lambda_n)):
        raise LengthMismatch(
            f"{len(features_real)} real / {len(features_fake)} fake features, "
            f"{len(lambda_n)} weights"
        )
    if not features_real:
        raise LengthMismatch("no feature layers given")
    total = None
    for fr, ff, lam in zip(features_real, features_fake, lambda_n):
        term = l1_loss(fr, ff) * float(lam)
        total = term if total is None else total + term
    return total
