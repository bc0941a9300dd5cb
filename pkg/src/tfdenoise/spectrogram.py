"""PNG rendering of the fixed-size log-magnitude grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .tfr import SAMPLE_RATE, StftConfig, Waveform, stft_embed, to_log_magnitude


@dataclass(frozen=True)
class SpectrogramImage:
    db: np.ndarray  # (n_freq, n_time) dB re grid maximum, floored
    extent: tuple[float, float, float, float]  # t0, t1 [s], f0, f1 [Hz]

    @property
    def seconds_per_column(self) -> float:
        return (self.extent[1] - self.extent[0]) / self.db.shape[1]


def spectrogram_image(w: Waveform, floor_db: float = -100.0,
                      stft: StftConfig | None = None, offset_s: float = 0.0) -> SpectrogramImage:
    """Grid of one embeddable track; ``offset_s`` shifts the time axis (for chunks)."""
    stft = stft or StftConfig()
    grid = stft_embed(w, stft)
    lm = to_log_magnitude(grid, ref_db_floor=floor_db)
    db = (1.0 - lm.values) * floor_db / 2.0
    hop = grid.hop
    # column j is centred on its frame
    t0 = offset_s + (stft.window_len - hop) / 2 / SAMPLE_RATE
    t1 = t0 + stft.n_time * hop / SAMPLE_RATE
    f1 = stft.n_freq * SAMPLE_RATE / stft.window_len
    return SpectrogramImage(db, (t0, t1, 0.0, f1))


def render_png(img: SpectrogramImage, path, floor_db: float = -100.0, cmap: str = "viridis") -> None:
    fig = Figure(figsize=(5.0, 4.2), dpi=100)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(1, 1, 1)
    t0, t1, f0, f1 = img.extent
    im = ax.imshow(img.db, origin="lower", aspect="auto", cmap=cmap, vmin=floor_db, vmax=0.0,
                   extent=(t0, t1, f0 / 1000.0, f1 / 1000.0), interpolation="nearest")
    ax.set_xlabel("Time [s]")
    ax.set_ylabel("Frequency [kHz]")
    fig.colorbar(im, ax=ax, label="dB")
    fig.tight_layout()
    # no Software/date chunks: identical inputs give identical bytes
    fig.savefig(path, format="png", metadata={"Software": None})
