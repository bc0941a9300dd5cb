"""WAV I/O, SNR-controlled mixing and track splitting."""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

from .errors import (CorruptHeader, NoiseTooShort, UnsupportedFormat, ZeroClean,
                     ZeroNoise)
from .tfr import SAMPLE_RATE, Waveform

PCM_SCALE = 32768.0
DEFAULT_MAX_LEN = 98304


def read_wav(path: str | Path) -> Waveform:
    """Read a 16-bit PCM mono 16 kHz WAV file, scaled to [-1, 1)."""
    try:
        with wave.open(str(path), "rb") as f:
            channels, width, rate = f.getnchannels(), f.getsampwidth(), f.getframerate()
            n = f.getnframes()
            if f.getcomptype() != "NONE":
                raise UnsupportedFormat(f"{path}: compressed WAV is not supported")
            if channels != 1:
                raise UnsupportedFormat(f"{path}: {channels} channels, expected mono")
            if width != 2:
                raise UnsupportedFormat(f"{path}: {8 * width}-bit samples, expected 16-bit")
            if rate != SAMPLE_RATE:
                raise UnsupportedFormat(f"{path}: {rate} Hz, expected {SAMPLE_RATE} Hz")
            raw = f.readframes(n)
    except (wave.Error, EOFError) as exc:
        if "unknown format" in str(exc):
            raise UnsupportedFormat(f"{path}: {exc}") from exc
        raise CorruptHeader(f"{path}: {exc}") from exc
    if len(raw) != 2 * n:
        raise CorruptHeader(f"{path}: header promises {n} frames, data holds {len(raw) // 2}")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
    return Waveform(samples, rate)


def quantize(samples: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    return np.clip(np.round(x * PCM_SCALE), -32768, 32767).astype("<i2")


def write_wav(path: str | Path, w: Waveform) -> None:
    data = quantize(w.samples)
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(w.sample_rate)
        f.writeframes(data.tobytes())


def power(x: np.ndarray) -> float:
    return float(np.mean(np.square(x, dtype=np.float64)))


def mix_gain(clean: np.ndarray, noise_segment: np.ndarray, snr_db: float) -> float:
    p_clean, p_noise = power(clean), power(noise_segment)
    if p_clean == 0.0:
        raise ZeroClean("clean track is silent")
    if p_noise == 0.0:
        raise ZeroNoise("noise segment is silent")
    return float(np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0))))


def mix_at_snr(clean: Waveform, noise: Waveform, snr_db: float, offset: int = 0) -> Waveform:
    """Add ``noise[offset:offset+len(clean)]`` scaled to the target whole-track SNR."""
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    n = len(clean)
    if offset < 0 or len(noise) < n + offset:
        raise NoiseTooShort(
            f"noise has {len(noise)} samples, need {n + offset} (offset {offset})"
        )
    segment = noise.samples[offset : offset + n]
    g = mix_gain(clean.samples, segment, snr_db)
    return Waveform(clean.samples + g * segment, clean.sample_rate)


def measured_snr(clean: np.ndarray, mixture: np.ndarray) -> float:
    clean = np.asarray(getattr(clean, "samples", clean))
    mixture = np.asarray(getattr(mixture, "samples", mixture))
    return 10.0 * np.log10(power(clean) / power(mixture - clean))


def random_offset(clean_len: int, noise_len: int, rng: np.random.Generator) -> int:
    if noise_len < clean_len:
        raise NoiseTooShort(f"noise has {noise_len} samples, clean has {clean_len}")
    return int(rng.integers(0, noise_len - clean_len + 1))


def split_track(w: Waveform, max_len: int = DEFAULT_MAX_LEN) -> list[Waveform]:
    if max_len < 1:
        raise ValueError("max_len must be positive")
    x = w.samples
    return [Waveform(x[i : i + max_len], w.sample_rate) for i in range(0, x.size, max_len)]
