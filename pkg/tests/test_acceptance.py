"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL/SKIP line that pytest prints in a final
"acceptance criteria" section. The toy adversarial run (criteria 7, 8 and 10)
is trained twice per session, which takes several minutes on one CPU core.
Criterion 9 needs real corpora: set ``TFDENOISE_CLEAN_DIR`` (TIMIT-style speech)
and ``TFDENOISE_NOISE_DIR`` (speech-like noise recordings) to enable it.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import band_limited, record_acceptance
from gradcheck import check, projected
from tfdenoise.audio import measured_snr, mix_at_snr, read_wav, write_wav
from tfdenoise.autodiff import (Tensor, batch_norm, clamp, concat_channels, conv2d,
                                conv2d_transpose, instance_norm, leaky_relu, log, mean,
                                permute, relu, reshape, sigmoid, tabs, tanh, tsum)
from tfdenoise.checkpoint import save_checkpoint
from tfdenoise.cli import main as cli_main
from tfdenoise.istft import interior_sdr, ls_istft
from tfdenoise.losses import adv_loss_d, l1_loss, perceptual_loss
from tfdenoise.manifest import build_manifest
from tfdenoise.metrics import evaluate
from tfdenoise.models import UBlock, UBlockConfig
from tfdenoise.synthetic import make_toy_corpus, toy_manifest
from tfdenoise.tfr import (StftConfig, Waveform, adjust_length, compute_overlap, stft_embed)
from tfdenoise.train import (LossWeights, Trainer, TrainConfig, prepare_pairs, train,
                             train_step)

CFG = StftConfig()


def verdict(number, title, checks: dict[str, bool], detail=""):
    ok = all(checks.values())
    failed = ", ".join(k for k, v in checks.items() if not v)
    record_acceptance(number, title, ok, detail if ok else f"failed: {failed}; {detail}")
    assert ok, failed


# 1 ----------------------------------------------------------------------------
def test_01_overlap_arithmetic():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    lengths = rng.integers(512, 98304, size=1000, endpoint=True)
    frames_ok = eq_ok = True
    for L in lengths:
        o = compute_overlap(int(L), CFG)
        adjusted = len(adjust_length(Waveform(np.zeros(int(L))), o, CFG))
        hop = CFG.window_len - o
        frames_ok &= (adjusted - CFG.window_len) % hop == 0 and \
            (adjusted - CFG.window_len) // hop + 1 == CFG.n_time
        eq_ok &= adjusted == CFG.n_time * (CFG.window_len - o) + o
    known = {16000: 449, 64000: 262, 98304: 128}
    known_ok = all(compute_overlap(L, CFG) == o for L, o in known.items())
    elapsed = time.perf_counter() - t0
    verdict(1, "overlap and adjusted-length arithmetic",
            {"256 frames": bool(frames_ok), "length identity": bool(eq_ok),
             "known overlaps": known_ok, "runtime < 1 s": elapsed < 1.0},
            f"{elapsed:.3f} s")


# 2 ----------------------------------------------------------------------------
def test_02_round_trip_fidelity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    overlaps = np.linspace(128, 448, 50).round().astype(int)
    scores = []
    for o in overlaps:
        hop = CFG.window_len - o
        # any length with ceil(L / 256) == hop maps to this overlap
        L = CFG.n_time * hop - int(rng.integers(0, CFG.n_time))
        w = Waveform(0.1 * band_limited(L, rng))
        g = stft_embed(w, CFG)
        assert g.overlap == o
        out = ls_istft(g.magnitude, g.phase, g.overlap, CFG)
        scores.append(interior_sdr(w.samples, out.samples[:L], CFG.window_len))
    elapsed = time.perf_counter() - t0
    verdict(2, "STFT -> LS-ISTFT round trip",
            {"interior SDR >= 40 dB": min(scores) >= 40.0, "runtime < 30 s": elapsed < 30},
            f"min {min(scores):.1f} dB over {len(scores)} tracks, {elapsed:.1f} s")


# 3 ----------------------------------------------------------------------------
def test_03_mixer_accuracy():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(30):
        n = int(rng.integers(8000, 40000))
        clean = Waveform(rng.uniform(0.01, 0.5) * band_limited(n, rng))
        noise = Waveform(rng.uniform(0.01, 0.5) * rng.standard_normal(n + 20000))
        for target in (0.0, 5.0, 10.0):
            mix = mix_at_snr(clean, noise, target, int(rng.integers(0, 20000)))
            worst = max(worst, abs(measured_snr(clean.samples, mix.samples) - target))
    verdict(3, "mixer hits the target SNR", {"|error| <= 1e-6 dB": worst <= 1e-6},
            f"worst {worst:.2e} dB")


# 4 ----------------------------------------------------------------------------
def _t(shape, rng, grad=True, positive=False):
    x = rng.uniform(0.05, 1.5, shape) * (1 if positive else rng.choice([-1.0, 1.0], shape))
    return Tensor(x, requires_grad=grad, dtype=np.float64)


def test_04_autodiff_correctness():
    rng = np.random.default_rng(4)
    errors = {}
    x = _t((2, 3, 6, 6), rng)
    for name, fn in {
        "add/mul": lambda: projected(x * x + x * 2.0),
        "neg": lambda: projected(-x),
        "relu": lambda: projected(relu(x)),
        "leaky_relu": lambda: projected(leaky_relu(x)),
        "tanh": lambda: projected(tanh(x)),
        "sigmoid": lambda: projected(sigmoid(x)),
        "abs": lambda: projected(tabs(x)),
        "clamp": lambda: projected(clamp(x, -2.0, 2.0)),
        "reshape": lambda: projected(reshape(x, (6, 36))),
        "permute": lambda: projected(permute(x, (0, 2, 3, 1))),
        "sum": lambda: tsum(x * x),
        "mean": lambda: mean(x * x),
        "instance_norm": lambda: projected(instance_norm(x)),
        "batch_norm": lambda: projected(batch_norm(x)),
    }.items():
        errors[name] = check(fn, [x])
    pos = _t((3, 4), rng, positive=True)
    errors["log"] = check(lambda: tsum(log(pos)), [pos])
    a, b = _t((1, 2, 4, 4), rng), _t((1, 3, 4, 4), rng)
    errors["concat"] = check(lambda: projected(concat_channels(a, b)), [a, b])
    xi, w, bias = _t((2, 2, 8, 8), rng), _t((3, 2, 4, 4), rng), _t((3,), rng)
    errors["conv2d"] = check(lambda: projected(conv2d(xi, w, bias, 2, 1)), [xi, w, bias])
    yi, wt, bt = _t((2, 3, 4, 4), rng), _t((3, 2, 4, 4), rng), _t((2,), rng)
    errors["conv2d_transpose"] = check(lambda: projected(conv2d_transpose(yi, wt, bt, 2, 1)),
                                       [yi, wt, bt])

    block = UBlock(UBlockConfig(depth=3, base_channels=2), np.random.default_rng(5),
                   dtype=np.float64)
    for p in block.params.values():
        p.data += rng.normal(0, 0.05, p.shape)
    xu = Tensor(rng.uniform(-1, 1, (1, 1, 16, 16)), requires_grad=True, dtype=np.float64)
    errors["u-block depth 3"] = check(lambda: projected(block(xu)), [xu, *block.params.values()])

    adj = []
    for stride, pad, k in ((1, 0, 3), (1, 1, 3), (2, 1, 4), (2, 0, 2)):
        u = rng.standard_normal((2, 3, 8, 8))
        kern = rng.standard_normal((4, 3, k, k))
        cu = conv2d(Tensor(u), Tensor(kern), stride=stride, padding=pad).data
        v = rng.standard_normal(cu.shape)
        lhs = np.sum(cu * v)
        rhs = np.sum(u * conv2d_transpose(Tensor(v), Tensor(kern), stride=stride, padding=pad).data)
        adj.append(abs(lhs - rhs) / max(abs(lhs), 1.0))

    worst = max(errors, key=errors.get)
    verdict(4, "autodiff gradients and conv adjoint",
            {"finite differences < 1e-5": errors[worst] < 1e-5, "adjoint < 1e-6": max(adj) < 1e-6},
            f"worst {worst} {errors[worst]:.1e}, adjoint {max(adj):.1e}")


# 5 ----------------------------------------------------------------------------
def test_05_loss_unit_values():
    d = adv_loss_d(0.5, 0.5).item()
    a = np.random.default_rng(0).standard_normal((1, 2, 4, 4))
    l1_zero = l1_loss(a, a.copy()).item()
    p_zero = perceptual_loss([a, a], [a.copy(), a.copy()], [0.5, 0.5]).item()
    f1, f2 = np.zeros((1, 1, 4, 4)), np.zeros((1, 2, 2, 2))
    p = perceptual_loss([f1, f2], [f1 + 0.1, f2 + 0.4], [2.0, 1.0]).item()
    verdict(5, "loss unit values",
            {"adv_d(0.5,0.5)=2 ln 2": abs(d - 2 * math.log(2)) <= 1e-9,
             "l1 zero": l1_zero == 0.0, "perceptual zero": p_zero == 0.0,
             "perceptual example 0.6": abs(p - 0.6) <= 1e-9},
            f"adv_d={d:.12f}, perceptual={p:.12f}")


# shared toy corpus -----------------------------------------------------------
@pytest.fixture(scope="session")
def toy(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    clean, noise = make_toy_corpus(root)  # 20 speakers x 10 tracks
    manifest = toy_manifest(clean, noise)
    return root, manifest


# 6 ----------------------------------------------------------------------------
def test_06_supervised_overfit(toy):
    _, manifest = toy
    cfg = TrainConfig(epochs=1)
    pair = prepare_pairs(manifest, cfg.stft, cfg.seed)[0]
    trainer = Trainer(cfg, LossWeights(w_adv=0.0, w_l1=1.0, w_percep=0.0))
    batch = (pair.noisy[None, None], pair.clean[None, None])
    l1 = [train_step(batch, trainer.G, trainer.D, trainer.weights, trainer.opt_g,
                     trainer.opt_d).l1 for _ in range(200)]
    ratio = l1[-1] / l1[0]
    verdict(6, "supervised overfit of one 64x64 pair",
            {"final L1 < 20% of initial": ratio < 0.2},
            f"{l1[0]:.4f} -> {l1[-1]:.4f} ({100 * ratio:.1f}%)")


# 7, 8 -----------------------------------------------------------------------------
def _toy_run(root: Path, manifest, tag: str):
    cfg = TrainConfig(epochs=50, seed=0, grid=64)
    t0 = time.perf_counter()
    result = train(manifest, cfg, checkpoint_dir=root / f"ckpt_{tag}", log_path=root / f"{tag}.log")
    return result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def toy_runs(toy):
    root, manifest = toy
    first = _toy_run(root, manifest, "a")
    second = _toy_run(root, manifest, "b")
    return root, manifest, first, second


@pytest.mark.slow
def test_07_toy_adversarial_run(toy_runs):
    root, manifest, (result, elapsed), _ = toy_runs
    cfg = TrainConfig(epochs=50)
    assert result.generator.cfg.n_blocks == 3
    test_pairs = prepare_pairs(manifest, cfg.stft, cfg.seed, split="test")
    l1_noisy = float(np.mean([np.abs(p.noisy - p.clean).mean() for p in test_pairs]))
    l1_den = float(np.mean([np.abs(result.generator.denoise_array(p.noisy) - p.clean).mean()
                            for p in test_pairs]))
    noisy = evaluate(manifest, None, split="test")
    den = evaluate(manifest, result.generator, split="test", stft=cfg.stft)
    last = result.history[-1]
    verdict(7, "toy adversarial run (200 tracks, 64x64, 3 blocks, 50 epochs)",
            {"held-out L1 improves": l1_den < l1_noisy,
             "STOI improves": den.mean("stoi") > noisy.mean("stoi"),
             "all rows scored": all(r.ok for r in den.rows),
             "d_real in (0.05, 0.95)": 0.05 < last.d_real < 0.95,
             "d_fake in (0.05, 0.95)": 0.05 < last.d_fake < 0.95,
             "runtime < 30 min": elapsed < 1800},
            f"L1 {l1_noisy:.4f}->{l1_den:.4f}, STOI {noisy.mean('stoi'):.4f}->"
            f"{den.mean('stoi'):.4f}, D {last.d_real:.3f}/{last.d_fake:.3f}, {elapsed / 60:.1f} min")


@pytest.mark.slow
def test_08_determinism(toy_runs):
    root, _, (a, _), (b, _) = toy_runs
    ckpt_a = sorted((root / "ckpt_a").glob("*.aegn"))
    ckpt_b = sorted((root / "ckpt_b").glob("*.aegn"))
    same_ckpts = [p.name for p in ckpt_a] == [p.name for p in ckpt_b] and all(
        x.read_bytes() == y.read_bytes() for x, y in zip(ckpt_a, ckpt_b))
    same_log = (root / "a.log").read_bytes() == (root / "b.log").read_bytes()
    verdict(8, "two identical-seed runs are bit-identical",
            {"checkpoints": same_ckpts and len(ckpt_a) == 50, "logs": same_log,
             "final params": a.params.equals(b.params)},
            f"{len(ckpt_a)} checkpoints compared")


# 9 ----------------------------------------------------------------------------
REFERENCE_NOISY_STOI = {0.0: 0.65, 5.0: 0.77, 10.0: 0.86}


def test_09_corpus_noisy_baseline():
    clean_dir = os.environ.get("TFDENOISE_CLEAN_DIR")
    noise_dir = os.environ.get("TFDENOISE_NOISE_DIR")
    if not (clean_dir and noise_dir):
        record_acceptance(9, "noisy-baseline STOI on real corpora", None,
                          "set TFDENOISE_CLEAN_DIR and TFDENOISE_NOISE_DIR to run")
        pytest.skip("real speech and noise corpora not supplied")
    manifest = build_manifest(clean_dir, noise_dir, snrs=tuple(REFERENCE_NOISY_STOI))
    report = evaluate(manifest.split("test"))
    got = {}
    for snr in REFERENCE_NOISY_STOI:
        vals = [r.stoi for r in report.rows if r.ok and r.snr_db == snr]
        got[snr] = float(np.mean(vals)) if vals else float("nan")
    verdict(9, "noisy-baseline STOI on real corpora",
            {f"{snr:g} dB within 0.05": abs(got[snr] - ref) <= 0.05
             for snr, ref in REFERENCE_NOISY_STOI.items()},
            ", ".join(f"{s:g} dB: {got[s]:.3f}" for s in got))


# 10 -------------------------------------------------------------------------------
@pytest.mark.slow
def test_10_cli_contract(toy_runs, tmp_path):
    root, _, (result, _), _ = toy_runs
    model = tmp_path / "toy.aegn"
    save_checkpoint(result.params, model)
    seven = Waveform(0.1 * band_limited(7 * 16000, np.random.default_rng(10)))
    write_wav(tmp_path / "in.wav", seven)
    rc = cli_main(["denoise", "--in", str(tmp_path / "in.wav"), "--model", str(model),
                   "--out", str(tmp_path / "out.wav")])
    out_len = len(read_wav(tmp_path / "out.wav")) if rc == 0 else -1
    pngs = []
    for name in ("a.png", "b.png"):
        code = cli_main(["spectrogram", "--in", str(tmp_path / "in.wav"),
                         "--out", str(tmp_path / name)])
        pngs.append((tmp_path / name).read_bytes() if code == 0 else b"")
    verdict(10, "CLI denoise length and spectrogram determinism",
            {"denoise exit 0": rc == 0, "7 s in, 7 s out": out_len == 112000,
             "identical PNG bytes": pngs[0] == pngs[1] and len(pngs[0]) > 0},
            f"{out_len} samples out")
