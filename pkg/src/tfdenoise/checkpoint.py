"""Binary checkpoint files.

Layout (little-endian)::

    b"AEGN" | u32 version
    repeated: u32 name_len | name (UTF-8) | u32 rank | u32 dims[rank] | f32 data
    u32 CRC32 of every preceding byte

Scalar metadata (configs, epoch, seed, optimizer step) is stored as rank-0
records under ``meta.`` names.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptCheckpoint, VersionMismatch
from .models import CasNetConfig, PatchDiscConfig, UBlockConfig
from .tfr import StftConfig

MAGIC = b"AEGN"
VERSION = 1
META_PREFIX = "meta."
_NORM_CODES = {"none": 0, "instance": 1, "batch": 2}
_WINDOW_CODES = {"hamming": 0, "hann": 1}


@dataclass
class ModelParams:
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict[str, float] = field(default_factory=dict)

    def subset(self, prefix: str) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items() if k.startswith(prefix)}

    def equals(self, other: "ModelParams") -> bool:
        if self.tensors.keys() != other.tensors.keys() or self.metadata != other.metadata:
            return False
        return all(np.array_equal(v, other.tensors[k]) for k, v in self.tensors.items())


def _record(name: str, data: np.ndarray) -> bytes:
    raw = name.encode("utf-8")
    arr = np.array(data, dtype="<f4", order="C")  # keeps rank 0 intact
    head = struct.pack("<I", len(raw)) + raw + struct.pack("<I", arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + arr.tobytes()


def encode_checkpoint(params: ModelParams, version: int = VERSION) -> bytes:
    names = list(params.tensors) + [META_PREFIX + k for k in params.metadata]
    if len(set(names)) != len(names):
        raise ValueError("duplicate tensor names")
    body = bytearray(MAGIC + struct.pack("<I", version))
    for name, arr in params.tensors.items():
        body += _record(name, arr)
    for key, value in params.metadata.items():
        body += _record(META_PREFIX + key, np.asarray(value))
    body += struct.pack("<I", zlib.crc32(bytes(body)))
    return bytes(body)


def save_checkpoint(params: ModelParams, path) -> None:
    Path(path).write_bytes(encode_checkpoint(params))


def decode_checkpoint(blob: bytes) -> ModelParams:
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise CorruptCheckpoint("not a checkpoint file (bad magic or too short)")
    (crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) != crc:
        raise CorruptCheckpoint("CRC mismatch: file is truncated or damaged")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != VERSION:
        raise VersionMismatch(f"checkpoint format v{version}, this build reads v{VERSION}")

    out = ModelParams()
    pos, end = 8, len(blob) - 4
    try:
        while pos < end:
            (n,) = struct.unpack_from("<I", blob, pos)
            name = blob[pos + 4 : pos + 4 + n].decode("utf-8")
            pos += 4 + n
            (rank,) = struct.unpack_from("<I", blob, pos)
            dims = struct.unpack_from(f"<{rank}I", blob, pos + 4)
            pos += 4 + 4 * rank
            count = int(np.prod(dims)) if rank else 1
            if pos + 4 * count > end:
                raise CorruptCheckpoint(f"record {name!r} runs past end of file")
            data = np.frombuffer(blob, dtype="<f4", count=count, offset=pos).reshape(dims)
            pos += 4 * count
            if name.startswith(META_PREFIX):
                out.metadata[name[len(META_PREFIX):]] = float(data)
            elif name in out.tensors:
                raise CorruptCheckpoint(f"duplicate record {name!r}")
            else:
                out.tensors[name] = data.astype(np.float32)
    except (struct.error, UnicodeDecodeError, ValueError) as exc:
        raise CorruptCheckpoint(f"malformed record at byte {pos}: {exc}") from exc
    return out


def load_checkpoint(path, expect: dict[str, float] | None = None) -> ModelParams:
    """Read a checkpoint; ``expect`` holds metadata that must match exactly."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CorruptCheckpoint(f"cannot read {path}: {exc}") from exc
    params = decode_checkpoint(blob)
    if expect:
        diff = {k: (v, params.metadata.get(k)) for k, v in expect.items()
                if params.metadata.get(k) != float(v)}
        if diff:
            raise VersionMismatch(f"checkpoint config differs (expected, found): {diff}")
    return params


def config_metadata(gen: CasNetConfig, disc: PatchDiscConfig, stft: StftConfig) -> dict[str, float]:
    u = gen.ublock
    return {
        "g.n_blocks": gen.n_blocks,
        "g.depth": u.depth,
        "g.base_channels": u.base_channels,
        "g.norm": _NORM_CODES[u.norm],
        "g.max_mult": u.max_mult,
        "d.patch_size": disc.patch_size,
        "d.base_channels": disc.base_channels,
        "d.norm": _NORM_CODES[disc.norm],
        "d.kernel": disc.kernel,
        "d.tile": int(disc.tile),
        "d.max_mult": disc.max_mult,
        "stft.window_len": stft.window_len,
        "stft.n_freq": stft.n_freq,
        "stft.n_time": stft.n_time,
        "stft.window": _WINDOW_CODES[stft.window],
    }


def configs_from_metadata(meta: dict[str, float]) -> tuple[CasNetConfig, PatchDiscConfig, StftConfig]:
    norms = {v: k for k, v in _NORM_CODES.items()}
    windows = {v: k for k, v in _WINDOW_CODES.items()}
    try:
        gen = CasNetConfig(
            n_blocks=int(meta["g.n_blocks"]),
            ublock=UBlockConfig(depth=int(meta["g.depth"]),
                                base_channels=int(meta["g.base_channels"]),
                                norm=norms[int(meta["g.norm"])],
                                max_mult=int(meta["g.max_mult"])),
        )
        disc = PatchDiscConfig(patch_size=int(meta["d.patch_size"]),
                               base_channels=int(meta["d.base_channels"]),
                               norm=norms[int(meta["d.norm"])],
                               kernel=int(meta["d.kernel"]),
                               tile=bool(meta["d.tile"]),
                               max_mult=int(meta["d.max_mult"]))
        stft = StftConfig(window_len=int(meta["stft.window_len"]),
                          n_freq=int(meta["stft.n_freq"]),
                          n_time=int(meta["stft.n_time"]),
                          window=windows[int(meta["stft.window"])])
    except KeyError as exc:
        raise VersionMismatch(f"checkpoint lacks config entry {exc}") from exc
    return gen, disc, stft
