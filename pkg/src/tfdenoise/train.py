"""Alternating adversarial training of the CasNet generator and patch discriminator."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio import split_track
from .autodiff import Adam, Tensor
from .checkpoint import (ModelParams, config_metadata, configs_from_metadata, load_checkpoint,
                         save_checkpoint)
from .errors import DivergedError, EmptyCorpus, NoActiveLoss, VersionMismatch
from .losses import adv_loss_d, adv_loss_g, l1_loss, perceptual_loss
from .manifest import DatasetManifest, load_pair
from .models import CasNet, CasNetConfig, PatchDiscConfig, PatchDiscriminator, UBlockConfig
from .tfr import StftConfig, max_track_len, stft_embed, to_log_magnitude

log = logging.getLogger(__name__)

LOG_HEADER = "epoch\tstep\tloss_d\tloss_g_adv\tloss_g_l1\tloss_g_percep\td_real\td_fake"
MAX_SEED = 2**24  # seeds are stored exactly in f32 checkpoint metadata


@dataclass(frozen=True)
class LossWeights:
    w_adv: float = 1.0
    w_l1: float = 100.0
    w_percep: float = 10.0
    lambda_n: tuple[float, ...] | None = None  # None: uniform 1/N

    def __post_init__(self):
        ws = (self.w_adv, self.w_l1, self.w_percep)
        if any(w < 0 for w in ws):
            raise ValueError("loss weights must be non-negative")
        if not any(w > 0 for w in ws):
            raise NoActiveLoss("all loss weights are zero")

    def lambdas(self, n_layers: int) -> tuple[float, ...]:
        if self.lambda_n is None:
            return (1.0 / n_layers,) * n_layers
        if len(self.lambda_n) != n_layers:
            raise ValueError(f"lambda_n has {len(self.lambda_n)} entries, discriminator has {n_layers}")
        return tuple(self.lambda_n)


def default_models_for_grid(grid: int) -> tuple[CasNetConfig, PatchDiscConfig]:
    # U-block depth leaves a 4x4 bottleneck
    depth = max(2, int(math.log2(grid)) - 2)
    return CasNetConfig(3, UBlockConfig(depth=depth)), PatchDiscConfig()


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    seed: int = 0
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 1
    grid: int = 64
    generator: CasNetConfig | None = None
    discriminator: PatchDiscConfig | None = None
    saturating_g: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 <= self.seed < MAX_SEED:
            raise ValueError(f"seed must lie in [0, {MAX_SEED})")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        g, d = default_models_for_grid(self.grid)
        if self.generator is None:
            object.__setattr__(self, "generator", g)
        if self.discriminator is None:
            object.__setattr__(self, "discriminator", d)

    @property
    def stft(self) -> StftConfig:
        return StftConfig.for_grid(self.grid)


@dataclass(frozen=True)
class StepReport:
    loss_d: float
    adv: float
    l1: float
    percep: float
    d_real: float
    d_fake: float
    weights: LossWeights

    def contributions(self) -> dict[str, float]:
        w = self.weights
        return {"adv": w.w_adv * self.adv, "l1": w.w_l1 * self.l1,
                "percep": w.w_percep * self.percep}

    @property
    def loss_g(self) -> float:
        return sum(self.contributions().values())


def _check_finite(name: str, t: Tensor) -> float:
    v = t.item()
    if not math.isfinite(v):
        raise DivergedError(f"{name} became {v}")
    return v


def train_step(batch: tuple[np.ndarray, np.ndarray], G: CasNet, D: PatchDiscriminator,
               weights: LossWeights, opt_g: Adam, opt_d: Adam,
               saturating_g: bool = False) -> StepReport:
    """One discriminator update on a detached fake, then one generator update."""
    y_np, x_np = batch
    y = Tensor(y_np, dtype=G.dtype)
    x = Tensor(x_np, dtype=G.dtype)
    use_d = weights.w_adv > 0 or weights.w_percep > 0

    x_hat = G(y)
    if not np.all(np.isfinite(x_hat.data)):
        raise DivergedError("generator output is not finite")
    loss_d_v = d_real_v = d_fake_v = float("nan")
    if use_d:
        real = D(x, y)
        fake = D(x_hat.detach(), y)
        _check_finite("d_real", real.score)
        _check_finite("d_fake", fake.score)
        loss_d = adv_loss_d(real.score, fake.score)
        d_real_v, d_fake_v = real.score.item(), fake.score.item()
        loss_d_v = _check_finite("loss_d", loss_d)
        opt_d.zero_grad()
        loss_d.backward()
        opt_d.step()

    l1 = l1_loss(x, x_hat)
    total = l1 * weights.w_l1
    adv_v = percep_v = 0.0
    if use_d:
        fake = D(x_hat, y)
        if weights.w_adv > 0:
            adv = adv_loss_g(fake.score, saturating=saturating_g)
            adv_v = _check_finite("loss_g_adv", adv)
            total = total + adv * weights.w_adv
        if weights.w_percep > 0:
            real_feats = [f.detach() for f in D(x, y).features]
            percep = perceptual_loss(real_feats, fake.features,
                                     weights.lambdas(len(fake.features)))
            percep_v = _check_finite("loss_g_percep", percep)
            total = total + percep * weights.w_percep
    l1_v = _check_finite("loss_g_l1", l1)
    _check_finite("loss_g", total)

    opt_g.zero_grad()
    total.backward()
    opt_g.step()
    D.zero_grad()  # generator pass leaves stray grads on D
    return StepReport(loss_d_v, adv_v, l1_v, percep_v, d_real_v, d_fake_v, weights)


# --------------------------------------------------------------------------
# data


@dataclass
class TrainingPair:
    noisy: np.ndarray  # (F, T) log-magnitude in [-1, 1]
    clean: np.ndarray
    record_index: int


def embed_pair(clean, noisy, stft: StftConfig) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a (clean, noisy) pair into embeddable chunks and map both to log grids.

    The clean grid is scaled by the noisy grid's maximum so that the
    generator's output can be inverted with the noisy reference level.
    """
    out = []
    max_len = max_track_len(stft)
    for c, n in zip(split_track(clean, max_len), split_track(noisy, max_len)):
        gn = stft_embed(n, stft)
        gc = stft_embed(c, stft)
        ln = to_log_magnitude(gn)
        if ln.recorded_max <= 0:
            continue
        lc = to_log_magnitude(gc, reference=ln.recorded_max)
        out.append((ln.values.astype(np.float32), lc.values.astype(np.float32)))
    return out


def prepare_pairs(manifest: DatasetManifest, stft: StftConfig, seed: int,
                  split: str | None = "train") -> list[TrainingPair]:
    pairs = []
    for i, rec in enumerate(manifest.records):
        if split is not None and rec.split != split:
            continue
        clean, noisy = load_pair(rec, i, seed)
        for yn, xc in embed_pair(clean, noisy, stft):
            pairs.append(TrainingPair(yn, xc, i))
    return pairs


# --------------------------------------------------------------------------
# loop


@dataclass
class EpochSummary:
    epoch: int
    step: int
    loss_d: float
    adv: float
    l1: float
    percep: float
    d_real: float
    d_fake: float

    def line(self) -> str:
        vals = (self.loss_d, self.adv, self.l1, self.percep, self.d_real, self.d_fake)
        return f"{self.epoch}\t{self.step}\t" + "\t".join(f"{v:.6f}" for v in vals)


@dataclass
class TrainResult:
    params: ModelParams
    generator: CasNet
    discriminator: PatchDiscriminator
    history: list[EpochSummary] = field(default_factory=list)

    @property
    def log_lines(self) -> list[str]:
        return [h.line() for h in self.history]


class Trainer:
    def __init__(self, cfg: TrainConfig, weights: LossWeights = LossWeights()):
        self.cfg = cfg
        self.weights = weights
        rng = np.random.default_rng([cfg.seed, 0])
        self.G = CasNet(cfg.generator, rng)
        self.D = PatchDiscriminator(cfg.discriminator, rng)
        betas = (cfg.beta1, cfg.beta2)
        self.opt_g = Adam(self.G.parameters(), cfg.lr, betas)
        self.opt_d = Adam(self.D.parameters(), cfg.lr, betas)
        self.epoch = 0
        self.step_count = 0

    # --- checkpoint state -------------------------------------------------
    def metadata(self) -> dict[str, float]:
        meta = config_metadata(self.cfg.generator, self.cfg.discriminator, self.cfg.stft)
        meta.update({"epoch": self.epoch, "seed": self.cfg.seed, "step": self.step_count,
                     "adam.G.t": self.opt_g.state.step, "adam.D.t": self.opt_d.state.step})
        return meta

    def to_params(self) -> ModelParams:
        tensors = {}
        tensors.update(self.G.state_dict())
        tensors.update(self.D.state_dict())
        for tag, opt in (("G", self.opt_g), ("D", self.opt_d)):
            for k in opt.params:
                tensors[f"adam.{tag}.m.{k}"] = opt.state.m[k].copy()
                tensors[f"adam.{tag}.v.{k}"] = opt.state.v[k].copy()
        return ModelParams(tensors, self.metadata())

    def restore(self, params: ModelParams) -> None:
        gen, disc, _ = configs_from_metadata(params.metadata)
        if gen != self.cfg.generator or disc != self.cfg.discriminator:
            raise VersionMismatch("checkpoint model configuration differs from TrainConfig")
        if int(params.metadata.get("seed", -1)) != self.cfg.seed:
            raise VersionMismatch("checkpoint was trained with a different seed")
        self.G.load_state_dict(params.tensors)
        self.D.load_state_dict(params.tensors)
        for tag, opt in (("G", self.opt_g), ("D", self.opt_d)):
            for k in opt.params:
                opt.state.m[k] = params.tensors[f"adam.{tag}.m.{k}"].copy()
                opt.state.v[k] = params.tensors[f"adam.{tag}.v.{k}"].copy()
            opt.state.step = int(params.metadata[f"adam.{tag}.t"])
        self.epoch = int(params.metadata["epoch"])
        self.step_count = int(params.metadata["step"])

    # --- training ----------------------------------------------------------
    def run_epoch(self, pairs: Sequence[TrainingPair]) -> EpochSummary:
        cfg = self.cfg
        self.epoch += 1
        order = np.random.default_rng([cfg.seed, 1, self.epoch]).permutation(len(pairs))
        reports = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            y = np.stack([pairs[i].noisy for i in idx])[:, None]
            x = np.stack([pairs[i].clean for i in idx])[:, None]
            reports.append(train_step((y, x), self.G, self.D, self.weights,
                                      self.opt_g, self.opt_d, cfg.saturating_g))
            self.step_count += 1
        means = [float(np.mean([getattr(r, f) for r in reports]))
                 for f in ("loss_d", "adv", "l1", "percep", "d_real", "d_fake")]
        return EpochSummary(self.epoch, self.step_count, *means)


def train(manifest: DatasetManifest, cfg: TrainConfig, weights: LossWeights = LossWeights(),
          checkpoint_dir=None, log_path=None, resume_from=None,
          pairs: Sequence[TrainingPair] | None = None) -> TrainResult:
    """Run ``cfg.epochs`` passes over the manifest's training records.

    Writes ``epoch_XXX.aegn`` checkpoints and appends one tab-separated line
    per epoch to ``log_path`` when those are given. ``resume_from`` continues
    a run from one of its checkpoints; the result matches the uninterrupted
    run bit for bit.
    """
    if pairs is None:
        if len(manifest.split("train")) == 0:
            raise EmptyCorpus("manifest has no training records")
        pairs = prepare_pairs(manifest, cfg.stft, cfg.seed)
    if not pairs:
        raise EmptyCorpus("no embeddable training pairs")

    trainer = Trainer(cfg, weights)
    history: list[EpochSummary] = []
    if resume_from is not None:
        trainer.restore(load_checkpoint(resume_from))

    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if ckpt_dir is not None:
        ckpt_dir.mkdir(parents=True, exist_ok=True)
    if log_path is not None and (resume_from is None or not Path(log_path).exists()):
        Path(log_path).write_text(LOG_HEADER + "\n", encoding="utf-8")

    while trainer.epoch < cfg.epochs:
        summary = trainer.run_epoch(pairs)
        history.append(summary)
        log.info("epoch %d: %s", summary.epoch, summary.line())
        if log_path is not None:
            with open(log_path, "a", encoding="utf-8") as f:
                f.write(summary.line() + "\n")
        if ckpt_dir is not None:
            save_checkpoint(trainer.to_params(), ckpt_dir / f"epoch_{summary.epoch:03d}.aegn")
    return TrainResult(trainer.to_params(), trainer.G, trainer.D, history)


def generator_from_params(params: ModelParams) -> tuple[CasNet, StftConfig]:
    gen, _, stft = configs_from_metadata(params.metadata)
    G = CasNet(gen)
    G.load_state_dict(params.tensors)
    return G, stft


def with_epochs(cfg: TrainConfig, epochs: int) -> TrainConfig:
    return replace(cfg, epochs=epochs)
