"""Generator and discriminator topologies built on the autodiff tensors.

* ``UBlock``: pix2pix-style encoder/decoder. Stride-2 4x4 convolutions with
  leaky-ReLU going down, stride-2 4x4 transpose convolutions with ReLU going
  up, mirror-level skip concatenation, tanh output.
* ``CasNet``: ``n_blocks`` U-blocks chained end to end, no weight sharing.
* ``PatchDiscriminator``: conditional; scores every ``patch_size`` square of
  the (candidate, condition) pair and averages the sigmoid scores.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .autodiff import (Tensor, batch_norm, concat_channels, conv2d, conv2d_transpose,
                       instance_norm, leaky_relu, mean, permute, relu, reshape, sigmoid,
                       tanh)
from .errors import ShapeMismatch

NORMS = ("instance", "batch", "none")
INIT_STD = 0.02


def _norm(x: Tensor, kind: str) -> Tensor:
    if kind == "instance":
        return instance_norm(x)
    if kind == "batch":
        return batch_norm(x)
    return x


@dataclass(frozen=True)
class UBlockConfig:
    depth: int = 4
    base_channels: int = 8
    norm: str = "instance"
    skip: bool = True
    max_mult: int = 8

    def __post_init__(self):
        if self.depth < 2:
            raise ValueError("U-block depth must be >= 2")
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}")
        if not self.skip:
            raise ValueError("U-blocks always use skip connections")

    def channels(self, level: int) -> int:
        return self.base_channels * min(2**level, self.max_mult)


@dataclass(frozen=True)
class CasNetConfig:
    n_blocks: int = 3
    ublock: UBlockConfig = field(default_factory=UBlockConfig)

    def __post_init__(self):
        if self.n_blocks < 1:
            raise ValueError("CasNet needs at least one block")


@dataclass(frozen=True)
class PatchDiscConfig:
    patch_size: int = 16
    base_channels: int = 8
    norm: str = "instance"
    kernel: int = 2
    tile: bool = False
    max_mult: int = 8

    def __post_init__(self):
        n = math.log2(self.patch_size)
        if self.patch_size < 4 or n != int(n):
            raise ValueError("patch_size must be a power of two >= 4")
        if self.kernel not in (2, 4):
            raise ValueError("kernel must be 2 (exact 16px receptive field) or 4 (padded)")
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}")

    @property
    def n_feature_layers(self) -> int:
        return int(math.log2(self.patch_size))

    def channels(self, level: int) -> int:
        return self.base_channels * min(2**level, self.max_mult)


class Module:
    """Holds named parameters; subclasses register them in construction order."""

    def __init__(self, prefix: str = "", dtype=np.float32):
        self.prefix = prefix
        self.dtype = dtype
        self.params: dict[str, Tensor] = {}

    def _param(self, name: str, shape: tuple[int, ...], rng: np.random.Generator | None,
               std: float = INIT_STD) -> Tensor:
        if rng is None or std == 0.0:
            data = np.zeros(shape, dtype=self.dtype)
        else:
            data = (rng.standard_normal(shape) * std).astype(self.dtype)
        t = Tensor(data, requires_grad=True, name=self.prefix + name)
        self.params[self.prefix + name] = t
        return t

    def parameters(self) -> dict[str, Tensor]:
        return self.params

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for k, p in self.params.items():
            if k not in state:
                raise KeyError(f"missing parameter {k}")
            if state[k].shape != p.shape:
                raise ShapeMismatch(f"{k}: checkpoint shape {state[k].shape} vs {p.shape}")
            p.data = np.array(state[k], dtype=self.dtype)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())


class UBlock(Module):
    def __init__(self, cfg: UBlockConfig = UBlockConfig(), rng=None, prefix="",
                 in_channels: int = 1, out_channels: int = 1, dtype=np.float32):
        super().__init__(prefix, dtype)
        self.cfg = cfg
        d = cfg.depth
        prev = in_channels
        for i in range(d):
            ch = cfg.channels(i)
            self._param(f"enc{i}.weight", (ch, prev, 4, 4), rng)
            self._param(f"enc{i}.bias", (ch,), None)
            prev = ch
        for i in range(d - 1, -1, -1):
            cin = cfg.channels(i) if i == d - 1 else 2 * cfg.channels(i)
            cout = out_channels if i == 0 else cfg.channels(i - 1)
            self._param(f"dec{i}.weight", (cin, cout, 4, 4), rng)
            self._param(f"dec{i}.bias", (cout,), None)

    def p(self, name: str) -> Tensor:
        return self.params[self.prefix + name]

    def __call__(self, x: Tensor) -> Tensor:
        cfg = self.cfg
        d = cfg.depth
        if x.ndim != 4:
            raise ShapeMismatch(f"expected NCHW input, got {x.shape}")
        h, w = x.shape[2:]
        if h % 2**d or w % 2**d:
            raise ShapeMismatch(f"spatial size {h}x{w} not divisible by 2^{d}")

        skips = []
        y = conv2d(x, self.p("enc0.weight"), self.p("enc0.bias"), stride=2, padding=1)
        skips.append(y)
        for i in range(1, d):
            y = conv2d(leaky_relu(y, 0.2), self.p(f"enc{i}.weight"), self.p(f"enc{i}.bias"),
                       stride=2, padding=1)
            if i < d - 1:
                y = _norm(y, cfg.norm)
            skips.append(y)

        for i in range(d - 1, 0, -1):
            y = conv2d_transpose(relu(y), self.p(f"dec{i}.weight"), self.p(f"dec{i}.bias"),
                                 stride=2, padding=1)
            y = _norm(y, cfg.norm)
            y = concat_channels(y, skips[i - 1])
        y = conv2d_transpose(relu(y), self.p("dec0.weight"), self.p("dec0.bias"),
                             stride=2, padding=1)
        return tanh(y)


class CasNet(Module):
    def __init__(self, cfg: CasNetConfig = CasNetConfig(), rng=None, prefix="G.",
                 dtype=np.float32):
        super().__init__(prefix, dtype)
        self.cfg = cfg
        self.blocks = [
            UBlock(cfg.ublock, rng, prefix=f"{prefix}block{k}.", dtype=dtype)
            for k in range(cfg.n_blocks)
        ]
        for b in self.blocks:
            self.params.update(b.params)

    def __call__(self, x: Tensor) -> Tensor:
        for block in self.blocks:
            x = block(x)
        return x

    def denoise_array(self, log_mag: np.ndarray) -> np.ndarray:
        """Forward a single (F, T) log-magnitude grid; no tape is kept."""
        x = Tensor(log_mag[None, None].astype(self.dtype))
        return self(x).data[0, 0].astype(np.float64)


@dataclass
class DiscOutput:
    score: Tensor
    patch_scores: Tensor
    features: list[Tensor]


class PatchDiscriminator(Module):
    def __init__(self, cfg: PatchDiscConfig = PatchDiscConfig(), rng=None, prefix="D.",
                 in_channels: int = 2, dtype=np.float32):
        super().__init__(prefix, dtype)
        self.cfg = cfg
        prev = in_channels
        k = cfg.kernel
        for i in range(cfg.n_feature_layers):
            ch = cfg.channels(i)
            self._param(f"conv{i}.weight", (ch, prev, k, k), rng)
            self._param(f"conv{i}.bias", (ch,), None)
            prev = ch
        self._param("score.weight", (1, prev, 1, 1), rng)
        self._param("score.bias", (1,), None)

    def p(self, name: str) -> Tensor:
        return self.params[self.prefix + name]

    def __call__(self, candidate: Tensor, condition: Tensor) -> DiscOutput:
        if candidate.shape != condition.shape:
            raise ShapeMismatch(f"candidate {candidate.shape} vs condition {condition.shape}")
        cfg = self.cfg
        n, _, h, w = candidate.shape
        ps = cfg.patch_size
        if h % ps or w % ps:
            raise ShapeMismatch(f"spatial size {h}x{w} not divisible by patch size {ps}")
        x = concat_channels(candidate, condition)
        nh, nw = h // ps, w // ps
        if cfg.tile:
            c = x.shape[1]
            x = reshape(x, (n, c, nh, ps, nw, ps))
            x = permute(x, (0, 2, 4, 1, 3, 5))
            x = reshape(x, (n * nh * nw, c, ps, ps))

        pad = 0 if cfg.kernel == 2 else 1
        features = []
        for i in range(cfg.n_feature_layers):
            x = conv2d(x, self.p(f"conv{i}.weight"), self.p(f"conv{i}.bias"),
                       stride=2, padding=pad)
            if i > 0:
                x = _norm(x, cfg.norm)
            x = leaky_relu(x, 0.2)
            features.append(x)
        logits = conv2d(x, self.p("score.weight"), self.p("score.bias"))
        patch_scores = sigmoid(logits)
        if cfg.tile:
            patch_scores = reshape(patch_scores, (n, 1, nh, nw))
        return DiscOutput(mean(patch_scores), patch_scores, features)


def config_dict(g: CasNetConfig, d: PatchDiscConfig) -> dict:
    return {"generator": asdict(g), "discriminator": asdict(d)}
