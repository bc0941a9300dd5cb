"""Fixed-size time-frequency embedding with a length-dependent hop.

Any track of up to ``max_track_len(cfg)`` samples is mapped to exactly
``n_time`` STFT frames by choosing the frame overlap from the track length::

    overlap = S - ceil(L / N_T)
    L'      = N_T * (S - overlap) + overlap

The track is then padded with silence (or truncated) at its end to ``L'``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch, TrackTooLong, TrackTooShort, UnsupportedFormat

SAMPLE_RATE = 16000


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Waveform:
    """Mono track. ``samples`` is a read-only float64 vector, nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ShapeMismatch(f"waveform must be 1-D, got shape {samples.shape}")
        if samples.size == 0:
            raise TrackTooShort("waveform has no samples")
        object.__setattr__(self, "samples", _readonly(samples))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def require_rate(w: Waveform, rate: int = SAMPLE_RATE) -> None:
    if w.sample_rate != rate:
        raise UnsupportedFormat(f"expected {rate} Hz audio, got {w.sample_rate} Hz")


@dataclass(frozen=True)
class StftConfig:
    window_len: int = 512
    n_freq: int = 256
    n_time: int = 256
    window: str = "hamming"

    def __post_init__(self):
        if self.window_len < 4 or self.window_len % 2:
            raise ValueError("window_len must be an even integer >= 4")
        if not 1 <= self.n_freq <= self.window_len // 2:
            raise ValueError("n_freq must lie in [1, window_len/2]")
        if self.n_time < 1:
            raise ValueError("n_time must be positive")
        if self.window not in ("hamming", "hann"):
            raise ValueError(f"unknown window {self.window!r}")

    @classmethod
    def for_grid(cls, size: int) -> "StftConfig":
        """Square ``size x size`` grid with a full-band one-sided spectrum."""
        return cls(window_len=2 * size, n_freq=size, n_time=size)

    @property
    def min_overlap(self) -> int:
        # 25% of the window, integer ceiling
        return -(-self.window_len // 4)

    def window_array(self) -> np.ndarray:
        # periodic form: the symmetric S+1 window without its last sample
        n = np.arange(self.window_len)
        if self.window == "hamming":
            return 0.54 - 0.46 * np.cos(2 * np.pi * n / self.window_len)
        return 0.5 - 0.5 * np.cos(2 * np.pi * n / self.window_len)


def max_track_len(cfg: StftConfig) -> int:
    """Longest track that still gets at least 25% overlap (98304 at defaults)."""
    return cfg.n_time * (cfg.window_len - cfg.min_overlap)


def compute_overlap(length: int, cfg: StftConfig) -> int:
    if length < 1:
        raise TrackTooShort(f"track length must be >= 1, got {length}")
    hop = -(-length // cfg.n_time)
    overlap = cfg.window_len - hop
    if cfg.window_len - overlap <= 0:
        raise TrackTooShort(f"non-positive hop for length {length}")
    if overlap < cfg.min_overlap:
        raise TrackTooLong(
            f"track of {length} samples exceeds {max_track_len(cfg)} samples; "
            "split it before embedding"
        )
    return overlap


def adjusted_length(overlap: int, cfg: StftConfig) -> int:
    return cfg.n_time * (cfg.window_len - overlap) + overlap


def adjust_length(w: Waveform, overlap: int, cfg: StftConfig) -> Waveform:
    """Pad with trailing zeros or drop trailing samples to the embedding length."""
    if not 0 <= overlap < cfg.window_len:
        raise ValueError(f"overlap must lie in [0, {cfg.window_len}), got {overlap}")
    target = adjusted_length(overlap, cfg)
    x = w.samples
    if x.size >= target:
        out = x[:target]
    else:
        out = np.concatenate([x, np.zeros(target - x.size)])
    return Waveform(out, w.sample_rate)


@dataclass(frozen=True)
class TfGrid:
    magnitude: np.ndarray
    phase: np.ndarray
    overlap: int
    adjusted_len: int
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        cfg = self.config
        shape = (cfg.n_freq, cfg.n_time)
        if self.magnitude.shape != shape or self.phase.shape != shape:
            raise ShapeMismatch(f"grid planes must be {shape}")
        if self.adjusted_len != adjusted_length(self.overlap, cfg):
            raise ValueError("adjusted_len inconsistent with overlap")
        object.__setattr__(self, "magnitude", _readonly(self.magnitude))
        object.__setattr__(self, "phase", _readonly(self.phase))

    @property
    def hop(self) -> int:
        return self.config.window_len - self.overlap


def frame_signal(x: np.ndarray, frame_len: int, hop: int, n_frames: int) -> np.ndarray:
    """(n_frames, frame_len) view of consecutive frames."""
    windows = np.lib.stride_tricks.sliding_window_view(x, frame_len)
    return windows[: (n_frames - 1) * hop + 1 : hop]


def stft_embed(w: Waveform, cfg: StftConfig | None = None) -> TfGrid:
    cfg = cfg or StftConfig()
    require_rate(w)
    overlap = compute_overlap(len(w), cfg)
    adjusted = adjust_length(w, overlap, cfg)
    hop = cfg.window_len - overlap
    frames = frame_signal(adjusted.samples, cfg.window_len, hop, cfg.n_time)
    spectrum = np.fft.rfft(frames * cfg.window_array(), n=cfg.window_len, axis=1)
    # drop the Nyquist bin (and anything above n_freq); rows = frequency
    spectrum = spectrum[:, : cfg.n_freq].T
    return TfGrid(
        magnitude=np.abs(spectrum),
        phase=np.angle(spectrum),
        overlap=overlap,
        adjusted_len=len(adjusted),
        config=cfg,
    )


@dataclass(frozen=True)
class LogMagnitude:
    """Log-magnitude mapped to [-1, 1]: +1 is the reference level, -1 the floor."""

    values: np.ndarray
    recorded_max: float
    ref_db_floor: float = -100.0

    def __post_init__(self):
        if self.ref_db_floor >= 0:
            raise ValueError("ref_db_floor must be negative")
        object.__setattr__(self, "values", _readonly(self.values))


def to_log_magnitude(
    g: TfGrid | np.ndarray,
    ref_db_floor: float = -100.0,
    reference: float | None = None,
) -> LogMagnitude:
    """Map linear magnitude to [-1, 1] in dB relative to ``reference``.

    ``reference`` defaults to the grid maximum. Passing another grid's maximum
    puts a clean target on the same scale as its noisy input.
    """
    mag = np.asarray(g.magnitude if isinstance(g, TfGrid) else g, dtype=np.float64)
    ref = float(mag.max()) if reference is None else float(reference)
    if ref <= 0:
        return LogMagnitude(-np.ones_like(mag), 0.0, ref_db_floor)
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mag / ref)
    db = np.clip(db, ref_db_floor, 0.0)
    return LogMagnitude(1.0 - 2.0 * db / ref_db_floor, ref, ref_db_floor)


def from_log_magnitude(lm: LogMagnitude | np.ndarray, recorded_max: float | None = None,
                       ref_db_floor: float = -100.0) -> np.ndarray:
    if isinstance(lm, LogMagnitude):
        values, floor = lm.values, lm.ref_db_floor
        if recorded_max is None:
            recorded_max = lm.recorded_max
    else:
        values, floor = np.asarray(lm, dtype=np.float64), ref_db_floor
    if recorded_max is None:
        raise ValueError("recorded_max is required for raw arrays")
    if recorded_max <= 0:
        return np.zeros(np.shape(values))
    db = (1.0 - np.clip(values, -1.0, 1.0)) * floor / 2.0
    return recorded_max * 10.0 ** (db / 20.0)
