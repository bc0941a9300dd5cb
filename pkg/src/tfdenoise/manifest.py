"""Paired-corpus manifests: which clean track is mixed with which noise, at what SNR."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .audio import mix_at_snr, random_offset, read_wav
from .errors import CorruptHeader, EmptyCorpus
from .tfr import Waveform

HEADER = "#aegan-manifest v1"
FORMAT_VERSION = 1
SPLITS = ("train", "test")


@dataclass(frozen=True)
class MixSpec:
    clean_path: str
    noise_path: str
    snr_db: float
    split: str = "train"

    def __post_init__(self):
        if not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")

    @property
    def noise_type(self) -> str:
        return Path(self.noise_path).stem

    @property
    def speaker(self) -> str:
        return Path(self.clean_path).parent.name

    @property
    def track_id(self) -> str:
        p = Path(self.clean_path)
        return f"{p.parent.name}/{p.stem}"


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[MixSpec, ...]
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def split(self, name: str) -> "DatasetManifest":
        return DatasetManifest(tuple(r for r in self.records if r.split == name))

    def to_text(self) -> str:
        lines = [HEADER]
        for r in self.records:
            lines.append(f"{r.clean_path}\t{r.noise_path}\t{_fmt_snr(r.snr_db)}\t{r.split}")
        return "\n".join(lines) + "\n"


def _fmt_snr(snr: float) -> str:
    return format(float(snr), ".12g")


def _wav_files(root: Path) -> list[Path]:
    return sorted(root.rglob("*.wav"), key=lambda p: p.relative_to(root).as_posix())


def _speaker_of(path: Path, root: Path) -> str:
    rel = path.relative_to(root)
    # files sitting directly in the corpus root count as their own speaker
    return rel.parent.as_posix() if len(rel.parts) > 1 else rel.stem


def assign_splits(speakers: Iterable[str], test_fraction: float, seed: int) -> dict[str, str]:
    unique = sorted(set(speakers))
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError("test_fraction must lie in [0, 1)")
    n_test = int(round(test_fraction * len(unique)))
    if test_fraction > 0 and len(unique) > 1:
        n_test = min(max(n_test, 1), len(unique) - 1)
    order = np.random.default_rng(seed).permutation(len(unique))
    test = {unique[i] for i in order[:n_test]}
    return {s: ("test" if s in test else "train") for s in unique}


def build_manifest(clean_dir, noise_dir, snrs=(0.0, 5.0, 10.0),
                   test_fraction: float = 0.2, seed: int = 0) -> DatasetManifest:
    """Cross product of clean tracks x noise files x SNRs, split by speaker directory."""
    clean_root, noise_root = Path(clean_dir), Path(noise_dir)
    for root in (clean_root, noise_root):
        if not root.is_dir():
            raise EmptyCorpus(f"{root} is not a directory")
    cleans, noises = _wav_files(clean_root), _wav_files(noise_root)
    if not cleans:
        raise EmptyCorpus(f"no .wav files under {clean_root}")
    if not noises:
        raise EmptyCorpus(f"no .wav files under {noise_root}")
    if len(snrs) == 0:
        raise EmptyCorpus("no SNR levels given")

    speakers = {c: _speaker_of(c, clean_root) for c in cleans}
    split_of = assign_splits(speakers.values(), test_fraction, seed)
    records = [
        MixSpec(c.as_posix(), n.as_posix(), float(snr), split_of[speakers[c]])
        for c in cleans
        for n in noises
        for snr in snrs
    ]
    return DatasetManifest(tuple(records))


def parse_manifest(text: str) -> DatasetManifest:
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise CorruptHeader(f"manifest must start with {HEADER!r}")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise CorruptHeader(f"line {lineno}: expected 4 tab-separated fields")
        clean, noise, snr, split = fields
        records.append(MixSpec(clean, noise, float(snr), split))
    return DatasetManifest(tuple(records))


def write_manifest(path, manifest: DatasetManifest) -> None:
    Path(path).write_bytes(manifest.to_text().encode("utf-8"))


def read_manifest(path) -> DatasetManifest:
    return parse_manifest(Path(path).read_bytes().decode("utf-8"))


def record_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def load_pair(record: MixSpec, index: int, seed: int = 0) -> tuple[Waveform, Waveform]:
    """Read a record's clean track and build its noisy mixture.

    The noise offset comes from ``(seed, index)`` only, so any record can be
    materialized independently and reproducibly.
    """
    clean = read_wav(record.clean_path)
    noise = read_wav(record.noise_path)
    offset = random_offset(len(clean), len(noise), record_rng(seed, index))
    return clean, mix_at_snr(clean, noise, record.snr_db, offset)

