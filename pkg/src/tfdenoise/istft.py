"""Least-squares inverse STFT and the SDR used to judge reconstructions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientOverlap, ShapeMismatch, ZeroReference
from .tfr import SAMPLE_RATE, StftConfig, TfGrid, Waveform, adjusted_length

SDR_CAP_DB = 120.0
_DENOM_GUARD = 1e-12


def ls_istft(magnitude: np.ndarray, phase: np.ndarray, overlap: int,
             cfg: StftConfig | None = None) -> Waveform:
    """Rebuild a track from magnitude and phase planes (frequency x time).

    Each frame is inverse-transformed, weighted by the analysis window and
    overlap-added; dividing by the summed squared window gives the signal
    whose STFT is closest (in the least-squares sense) to the given one.
    """
    cfg = cfg or StftConfig()
    shape = (cfg.n_freq, cfg.n_time)
    magnitude = np.asarray(magnitude, dtype=np.float64)
    phase = np.asarray(phase, dtype=np.float64)
    if magnitude.shape != shape or phase.shape != shape:
        raise ShapeMismatch(f"expected {shape} planes, got {magnitude.shape} / {phase.shape}")
    if overlap < cfg.min_overlap:
        raise InsufficientOverlap(
            f"overlap {overlap} below the {cfg.min_overlap}-sample minimum"
        )
    if overlap >= cfg.window_len:
        raise InsufficientOverlap(f"overlap {overlap} must be below window length")

    S = cfg.window_len
    hop = S - overlap
    n_bins = S // 2 + 1
    spectrum = np.zeros((cfg.n_time, n_bins), dtype=np.complex128)
    # dropped bins (Nyquist included) come back as zeros
    spectrum[:, : cfg.n_freq] = (magnitude * np.exp(1j * phase)).T
    frames = np.fft.irfft(spectrum, n=S, axis=1)

    win = cfg.window_array()
    length = adjusted_length(overlap, cfg)
    out = np.zeros(length)
    norm = np.zeros(length)
    win_sq = win * win
    for t in range(cfg.n_time):
        start = t * hop
        out[start : start + S] += frames[t] * win
        norm[start : start + S] += win_sq
    valid = norm > _DENOM_GUARD
    out[valid] /= norm[valid]
    out[~valid] = 0.0
    return Waveform(out, SAMPLE_RATE)


def grid_to_waveform(grid: TfGrid, magnitude: np.ndarray | None = None) -> Waveform:
    """Invert ``grid``, optionally swapping in a new magnitude (keeps the grid phase)."""
    mag = grid.magnitude if magnitude is None else magnitude
    return ls_istft(mag, grid.phase, grid.overlap, grid.config)


def sdr(reference: Waveform | np.ndarray, estimate: Waveform | np.ndarray) -> float:
    ref = np.asarray(getattr(reference, "samples", reference), dtype=np.float64)
    est = np.asarray(getattr(estimate, "samples", estimate), dtype=np.float64)
    if ref.shape != est.shape:
        raise ShapeMismatch(f"length mismatch {ref.shape} vs {est.shape}")
    signal = float(np.sum(ref * ref))
    if signal == 0.0:
        raise ZeroReference("reference signal is all zeros")
    err = float(np.sum((ref - est) ** 2))
    if err == 0.0:
        return SDR_CAP_DB
    return min(SDR_CAP_DB, 10.0 * np.log10(signal / err))


def interior_sdr(reference, estimate, margin: int) -> float:
    """SDR excluding ``margin`` samples at both ends (window taper region)."""
    ref = np.asarray(getattr(reference, "samples", reference))
    est = np.asarray(getattr(estimate, "samples", estimate))
    n = min(ref.size, est.size)
    return sdr(ref[margin : n - margin], est[margin : n - margin])


@dataclass(frozen=True)
class ReconstructionReport:
    waveform: Waveform
    sdr_db: float | None = None


def reconstruct(grid: TfGrid, magnitude: np.ndarray | None = None,
                reference: Waveform | None = None) -> ReconstructionReport:
    w = grid_to_waveform(grid, magnitude)
    score = None
    if reference is not None:
        ref = np.zeros(len(w))
        n = min(len(w), len(reference))
        ref[:n] = reference.samples[:n]
        score = interior_sdr(ref, w, grid.config.window_len)
    return ReconstructionReport(w, score)
