"""Spectrogram-domain speech denoising with a cascaded U-Net generator and a
patch discriminator, built on a small numpy autodiff engine."""

from .errors import DenoiseError
from .tfr import SAMPLE_RATE, LogMagnitude, StftConfig, TfGrid, Waveform, stft_embed
from .istft import ls_istft, sdr
from .audio import mix_at_snr, read_wav, write_wav
from .enhance import denoise_waveform

__all__ = [
    "DenoiseError", "SAMPLE_RATE", "LogMagnitude", "StftConfig", "TfGrid", "Waveform",
    "stft_embed", "ls_istft", "sdr", "mix_at_snr", "read_wav", "write_wav", "denoise_waveform",
]
__version__ = "0.1.0"
