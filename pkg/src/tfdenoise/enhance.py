"""Track-level denoising: split, embed, run the generator, invert with the noisy phase."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .audio import split_track
from .istft import ls_istft
from .tfr import (StftConfig, Waveform, from_log_magnitude, max_track_len, stft_embed,
                  to_log_magnitude)

GridFn = Callable[[np.ndarray], np.ndarray]


def as_grid_fn(model) -> GridFn:
    """Accept a CasNet (anything with ``denoise_array``) or a plain array callable."""
    return getattr(model, "denoise_array", model)


def identity_model(log_mag: np.ndarray) -> np.ndarray:
    return log_mag


def denoise_waveform(w: Waveform, model, stft: StftConfig | None = None) -> Waveform:
    """Denoise a track of any length; the output has exactly ``len(w)`` samples."""
    stft = stft or StftConfig()
    fn = as_grid_fn(model)
    pieces = []
    for chunk in split_track(w, max_track_len(stft)):
        grid = stft_embed(chunk, stft)
        lm = to_log_magnitude(grid)
        if lm.recorded_max <= 0:
            pieces.append(np.zeros(len(chunk)))
            continue
        denoised = np.clip(np.asarray(fn(lm.values), dtype=np.float64), -1.0, 1.0)
        mag = from_log_magnitude(denoised, lm.recorded_max, lm.ref_db_floor)
        rec = ls_istft(mag, grid.phase, grid.overlap, stft)
        pieces.append(rec.samples[: len(chunk)])
    return Waveform(np.concatenate(pieces), w.sample_rate)
