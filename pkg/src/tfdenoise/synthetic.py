"""Synthetic speech-like corpus for desk-scale training and tests.

"Speech" is a harmonic tone stack with a per-speaker pitch, a slowly gliding
F0, two formant-like resonances and a syllable-rate amplitude envelope.
Noises are stationary colored Gaussian processes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.signal import butter, lfilter, sosfilt

from .audio import write_wav
from .manifest import DatasetManifest, MixSpec, assign_splits
from .tfr import SAMPLE_RATE, Waveform

NOISE_TYPES = ("pink", "brown", "bandpass")


def speech_like(duration: float, rng: np.random.Generator, f0: float | None = None,
                fs: int = SAMPLE_RATE, level: float = 0.1) -> np.ndarray:
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    f0 = rng.uniform(90.0, 240.0) if f0 is None else f0
    glide = 1.0 + 0.08 * np.sin(2 * np.pi * rng.uniform(0.5, 2.0) * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * f0 * np.cumsum(glide) / fs
    formants = rng.uniform([400, 1100], [900, 2600])
    sig = np.zeros(n)
    for h in range(1, int(4000 // f0) + 1):
        fh = h * f0
        gain = sum(np.exp(-0.5 * ((fh - fm) / 250.0) ** 2) for fm in formants) + 0.05 / h
        sig += gain * np.sin(h * phase + rng.uniform(0, 2 * np.pi))
    rate = rng.uniform(3.0, 6.0)
    env = 0.15 + 0.85 * np.sin(np.pi * rate * t + rng.uniform(0, np.pi)) ** 2
    sig *= env
    return level * sig / (np.sqrt(np.mean(sig**2)) + 1e-12)


def colored_noise(kind: str, duration: float, rng: np.random.Generator,
                  fs: int = SAMPLE_RATE, level: float = 0.1) -> np.ndarray:
    n = int(round(duration * fs))
    white = rng.standard_normal(n)
    if kind == "pink":
        # Kellet-style 1/f approximation
        b = [0.049922035, -0.095993537, 0.050612699, -0.004408786]
        a = [1, -2.494956002, 2.017265875, -0.522189400]
        x = lfilter(b, a, white)
    elif kind == "brown":
        x = lfilter([1.0], [1.0, -0.98], white)
    elif kind == "bandpass":
        x = sosfilt(butter(4, [300, 3000], btype="bandpass", fs=fs, output="sos"), white)
    else:
        raise ValueError(f"unknown noise type {kind!r}")
    return level * x / np.sqrt(np.mean(x**2))


def make_toy_corpus(root, n_speakers: int = 20, tracks_per_speaker: int = 10,
                    duration: float = 0.6, noise_duration: float = 3.0, seed: int = 0):
    """Write ``clean/spkNN/uttNN.wav`` and ``noise/<type>.wav``; returns both dirs."""
    root = Path(root)
    clean_dir, noise_dir = root / "clean", root / "noise"
    rng = np.random.default_rng(seed)
    for s in range(n_speakers):
        spk = clean_dir / f"spk{s:02d}"
        spk.mkdir(parents=True, exist_ok=True)
        f0 = rng.uniform(90.0, 240.0)
        for u in range(tracks_per_speaker):
            x = speech_like(duration, rng, f0=f0 * rng.uniform(0.9, 1.1))
            write_wav(spk / f"utt{u:02d}.wav", Waveform(x))
    noise_dir.mkdir(parents=True, exist_ok=True)
    for kind in NOISE_TYPES:
        write_wav(noise_dir / f"{kind}.wav", Waveform(colored_noise(kind, noise_duration, rng)))
    return clean_dir, noise_dir


def toy_manifest(clean_dir, noise_dir, snrs=(0.0, 5.0, 10.0), test_fraction: float = 0.2,
                 seed: int = 0) -> DatasetManifest:
    """One record per clean track, cycling through every (noise, SNR) combination."""
    clean_dir, noise_dir = Path(clean_dir), Path(noise_dir)
    cleans = sorted(clean_dir.rglob("*.wav"), key=lambda p: p.relative_to(clean_dir).as_posix())
    noises = sorted(noise_dir.glob("*.wav"))
    splits = assign_splits((c.parent.name for c in cleans), test_fraction, seed)
    records = []
    for k, c in enumerate(cleans):
        noise = noises[k % len(noises)]
        snr = snrs[(k // len(noises)) % len(snrs)]
        records.append(MixSpec(c.as_posix(), noise.as_posix(), float(snr), splits[c.parent.name]))
    return DatasetManifest(tuple(records))
