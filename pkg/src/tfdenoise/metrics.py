"""Objective speech metrics (STOI, segmental SNR, SDR) and corpus-level reports."""

from __future__ import annotations

import csv
import io
import math
from collections import OrderedDict
from dataclasses import dataclass
from math import gcd
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .enhance import denoise_waveform
from .errors import DenoiseError, ShapeMismatch, SilentReference, TooShort
from .istft import sdr
from .manifest import DatasetManifest, load_pair
from .tfr import StftConfig

# STOI constants
STOI_FS = 10000
STOI_FRAME = 256
STOI_NFFT = 512
STOI_BANDS = 15
STOI_MIN_FREQ = 150.0
STOI_SEGMENT = 30  # frames per short-time segment (384 ms)
STOI_BETA_DB = -15.0
STOI_DYN_RANGE_DB = 40.0
_EPS = np.finfo(np.float64).eps


def _samples(w) -> np.ndarray:
    return np.asarray(getattr(w, "samples", w), dtype=np.float64)


def third_octave_bands(fs=STOI_FS, nfft=STOI_NFFT, num_bands=STOI_BANDS,
                       min_freq=STOI_MIN_FREQ) -> tuple[np.ndarray, np.ndarray]:
    """(num_bands, nfft/2+1) 0/1 matrix summing FFT bins into 1/3-octave bands."""
    freqs = np.linspace(0, fs, nfft + 1)[: nfft // 2 + 1]
    k = np.arange(num_bands, dtype=np.float64)
    centers = min_freq * 2.0 ** (k / 3.0)
    lower = min_freq * 2.0 ** ((2 * k - 1) / 6.0)
    upper = min_freq * 2.0 ** ((2 * k + 1) / 6.0)
    obm = np.zeros((num_bands, freqs.size))
    for i in range(num_bands):
        lo = int(np.argmin((freqs - lower[i]) ** 2))
        hi = int(np.argmin((freqs - upper[i]) ** 2))
        obm[i, lo:hi] = 1.0
    return obm, centers


_OBM, _ = third_octave_bands()


def _hanning(n: int) -> np.ndarray:
    # symmetric window without the zero end points
    return np.hanning(n + 2)[1:-1]


def _frame_starts(length: int, frame: int, hop: int) -> range:
    return range(0, length - frame, hop)


def remove_silent_frames(x: np.ndarray, y: np.ndarray, dyn_range=STOI_DYN_RANGE_DB,
                         frame=STOI_FRAME, hop=STOI_FRAME // 2):
    """Drop frames of both signals where the clean frame is ``dyn_range`` dB
    below the loudest clean frame, then overlap-add the survivors."""
    w = _hanning(frame)
    starts = list(_frame_starts(x.size, frame, hop))
    if not starts:
        return x[:0], y[:0]
    energy = np.array([20 * np.log10(np.linalg.norm(x[s : s + frame] * w) / np.sqrt(frame) + _EPS)
                       for s in starts])
    keep = [s for s, e in zip(starts, energy) if e > energy.max() - dyn_range]
    x_out = np.zeros(x.size)
    y_out = np.zeros(y.size)
    for j, s in enumerate(keep):
        o = starts[j]
        x_out[o : o + frame] += x[s : s + frame] * w
        y_out[o : o + frame] += y[s : s + frame] * w
    end = starts[len(keep) - 1] + frame
    return x_out[:end], y_out[:end]


def _stdft(x: np.ndarray, frame=STOI_FRAME, hop=STOI_FRAME // 2, nfft=STOI_NFFT) -> np.ndarray:
    w = _hanning(frame)
    starts = list(_frame_starts(x.size, frame, hop))
    if not starts:
        return np.zeros((0, nfft // 2 + 1), dtype=complex)
    frames = np.stack([x[s : s + frame] * w for s in starts])
    return np.fft.rfft(frames, n=nfft, axis=1)


def resample(x: np.ndarray, fs_in: int, fs_out: int) -> np.ndarray:
    if fs_in == fs_out:
        return x
    g = gcd(fs_in, fs_out)
    return resample_poly(x, fs_out // g, fs_in // g)


def stoi(clean, degraded, fs: int = 16000) -> float:
    """Short-time objective intelligibility of ``degraded`` against ``clean``."""
    x, y = _samples(clean), _samples(degraded)
    if x.shape != y.shape:
        raise ShapeMismatch(f"stoi: lengths differ ({x.size} vs {y.size})")
    if not np.any(x):
        raise SilentReference("clean reference is silent")
    x, y = resample(x, fs, STOI_FS), resample(y, fs, STOI_FS)
    x, y = remove_silent_frames(x, y)

    x_tob = np.sqrt(_OBM @ np.abs(_stdft(x).T) ** 2)
    y_tob = np.sqrt(_OBM @ np.abs(_stdft(y).T) ** 2)
    n_frames = x_tob.shape[1]
    if n_frames < STOI_SEGMENT:
        raise TooShort(
            f"{n_frames} non-silent frames, STOI needs at least {STOI_SEGMENT} (~0.4 s of speech)"
        )

    # (segments, bands, frames-in-segment)
    idx = np.arange(STOI_SEGMENT)[None, :] + np.arange(n_frames - STOI_SEGMENT + 1)[:, None]
    xs = x_tob[:, idx].transpose(1, 0, 2)
    ys = y_tob[:, idx].transpose(1, 0, 2)

    alpha = np.linalg.norm(xs, axis=2, keepdims=True) / (np.linalg.norm(ys, axis=2, keepdims=True) + _EPS)
    clip = 1.0 + 10.0 ** (-STOI_BETA_DB / 20.0)
    yp = np.minimum(alpha * ys, xs * clip)

    xc = xs - xs.mean(axis=2, keepdims=True)
    yc = yp - yp.mean(axis=2, keepdims=True)
    xc /= np.linalg.norm(xc, axis=2, keepdims=True) + _EPS
    yc /= np.linalg.norm(yc, axis=2, keepdims=True) + _EPS
    d = float(np.mean(np.sum(xc * yc, axis=2)))
    return min(1.0, max(0.0, d))


def segmental_snr(clean, degraded, frame: int = 512, floor_db: float = -10.0,
                  ceil_db: float = 35.0, active_range_db: float = 40.0) -> float:
    """Mean clamped per-frame SNR over frames where the clean track is active
    (within ``active_range_db`` of its loudest frame)."""
    x, y = _samples(clean), _samples(degraded)
    if x.shape != y.shape:
        raise ShapeMismatch(f"segmental_snr: lengths differ ({x.size} vs {y.size})")
    n = x.size // frame
    if n < 1:
        raise TooShort(f"need at least one {frame}-sample frame")
    xf = x[: n * frame].reshape(n, frame)
    ef = (x[: n * frame] - y[: n * frame]).reshape(n, frame)
    sig = np.sum(xf * xf, axis=1)
    err = np.sum(ef * ef, axis=1)
    if not np.any(sig > 0):
        raise SilentReference("clean reference is silent")
    with np.errstate(divide="ignore"):
        level = 10 * np.log10(sig)
        per_frame = 10 * np.log10(sig / err)
    per_frame = np.where(err == 0, ceil_db, per_frame)
    active = level > level.max() - active_range_db
    return float(np.mean(np.clip(per_frame[active], floor_db, ceil_db)))


# --------------------------------------------------------------------------
# corpus evaluation

CSV_HEADER = ("track", "noise_type", "snr_db", "stoi", "seg_snr_db", "sdr_db")


@dataclass
class MetricRow:
    track: str
    noise_type: str
    snr_db: float
    stoi: float | None = None
    seg_snr_db: float | None = None
    sdr_db: float | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class MetricReport:
    rows: list[MetricRow]

    def groups(self) -> "OrderedDict[tuple[str, float], dict[str, float]]":
        """Per-(noise type, SNR) means over rows without errors, in first-seen order."""
        buckets: OrderedDict[tuple[str, float], list[MetricRow]] = OrderedDict()
        for r in self.rows:
            if r.ok:
                buckets.setdefault((r.noise_type, r.snr_db), []).append(r)
        return OrderedDict(
            (key, {m: float(np.mean([getattr(r, m) for r in rows]))
                   for m in ("stoi", "seg_snr_db", "sdr_db")})
            for key, rows in buckets.items()
        )

    def mean(self, metric: str) -> float:
        vals = [getattr(r, metric) for r in self.rows if r.ok]
        return float(np.mean(vals)) if vals else math.nan

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.track, r.noise_type, _fmt(r.snr_db),
                        _fmt(r.stoi), _fmt(r.seg_snr_db), _fmt(r.sdr_db)])
        buf.write("\n")
        for (noise, snr), m in self.groups().items():
            w.writerow([f"MEAN:{noise}:{_fmt(snr)}", noise, _fmt(snr),
                        _fmt(m["stoi"]), _fmt(m["seg_snr_db"]), _fmt(m["sdr_db"])])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and v == int(v) and abs(v) < 1e6:
        return str(int(v))
    return f"{v:.6f}"


def evaluate(manifest: DatasetManifest, model=None, seed: int = 0, split: str | None = None,
             stft: StftConfig | None = None) -> MetricReport:
    """Score every record (optionally restricted to one split) in manifest order.

    Without a model the noisy mixture itself is scored. With a model the
    mixture is denoised through the embed -> generator -> noisy-phase
    inversion pipeline first. Row failures are recorded, not raised.
    """
    rows = []
    for i, rec in enumerate(manifest.records):
        if split is not None and rec.split != split:
            continue
        row = MetricRow(rec.track_id, rec.noise_type, float(rec.snr_db))
        try:
            clean, noisy = load_pair(rec, i, seed)
            est = noisy if model is None else denoise_waveform(noisy, model, stft)
            row.stoi = stoi(clean, est)
            row.seg_snr_db = segmental_snr(clean, est)
            row.sdr_db = sdr(clean, est)
        except (DenoiseError, OSError) as exc:
            row.stoi = row.seg_snr_db = row.sdr_db = None
            row.error = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return MetricReport(rows)
