import numpy as np
import pytest
from hypothesis import settings
from scipy.signal import butter, sosfiltfilt

from tfdenoise.tfr import SAMPLE_RATE, Waveform

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def band_limited(n: int, rng: np.random.Generator, lo=80.0, hi=6000.0) -> np.ndarray:
    """White noise filtered to [lo, hi] Hz, unit RMS."""
    sos = butter(6, [lo, hi], btype="bandpass", fs=SAMPLE_RATE, output="sos")
    x = sosfiltfilt(sos, rng.standard_normal(n + 2000))[1000:-1000]
    return x / np.sqrt(np.mean(x**2))


def sine(freq: float, n: int, amp: float = 1.0) -> Waveform:
    return Waveform(amp * np.sin(2 * np.pi * freq * np.arange(n) / SAMPLE_RATE))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, title: str, ok: bool | None, detail: str = "") -> None:
    """Store one criterion verdict; ``ok=None`` marks a skip."""
    verdict = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    line = f"[{verdict}] criterion {number:2d}: {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
