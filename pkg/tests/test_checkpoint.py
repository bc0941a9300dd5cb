import numpy as np
import pytest
from hypothesis import given, strategies as st

from tfdenoise.checkpoint import (ModelParams, config_metadata, configs_from_metadata,
                                  decode_checkpoint, encode_checkpoint, load_checkpoint,
                                  save_checkpoint)
from tfdenoise.errors import CorruptCheckpoint, VersionMismatch
from tfdenoise.models import CasNetConfig, PatchDiscConfig, UBlockConfig
from tfdenoise.tfr import StftConfig


def random_params(seed=0) -> ModelParams:
    r = np.random.default_rng(seed)
    tensors = {
        "G.block0.enc0.weight": r.standard_normal((4, 1, 4, 4)).astype(np.float32),
        "G.block0.enc0.bias": r.standard_normal(4).astype(np.float32),
        "D.score.weight": r.standard_normal((1, 8, 1, 1)).astype(np.float32),
        "scalar": np.float32(r.standard_normal()).reshape(()),
    }
    return ModelParams(tensors, {"epoch": 3.0, "seed": 7.0})


@given(st.integers(0, 2**32 - 1))
def test_round_trip(seed):
    p = random_params(seed)
    assert decode_checkpoint(encode_checkpoint(p)).equals(p)


def test_file_round_trip_and_bytes_stable(tmp_path):
    p = random_params()
    save_checkpoint(p, tmp_path / "a.aegn")
    save_checkpoint(p, tmp_path / "b.aegn")
    assert (tmp_path / "a.aegn").read_bytes() == (tmp_path / "b.aegn").read_bytes()
    assert load_checkpoint(tmp_path / "a.aegn").equals(p)


def test_layout_header():
    blob = encode_checkpoint(random_params())
    assert blob[:4] == b"AEGN"
    assert int.from_bytes(blob[4:8], "little") == 1


@pytest.mark.parametrize("cut", [1, 10, 100])
def test_truncated(cut):
    blob = encode_checkpoint(random_params())
    with pytest.raises(CorruptCheckpoint):
        decode_checkpoint(blob[:-cut])


def test_bit_flip_detected():
    blob = bytearray(encode_checkpoint(random_params()))
    blob[40] ^= 0x01
    with pytest.raises(CorruptCheckpoint):
        decode_checkpoint(bytes(blob))


def test_version_mismatch():
    with pytest.raises(VersionMismatch):
        decode_checkpoint(encode_checkpoint(random_params(), version=2))


def test_expected_metadata(tmp_path):
    save_checkpoint(random_params(), tmp_path / "c.aegn")
    load_checkpoint(tmp_path / "c.aegn", expect={"seed": 7})
    with pytest.raises(VersionMismatch):
        load_checkpoint(tmp_path / "c.aegn", expect={"seed": 8})


def test_missing_file(tmp_path):
    with pytest.raises(CorruptCheckpoint):
        load_checkpoint(tmp_path / "nope.aegn")


def test_config_metadata_round_trip():
    gen = CasNetConfig(2, UBlockConfig(depth=5, base_channels=4, norm="batch"))
    disc = PatchDiscConfig(base_channels=16, kernel=4, tile=True, norm="none")
    stft = StftConfig(window_len=256, n_freq=128, n_time=128, window="hann")
    assert configs_from_metadata(config_metadata(gen, disc, stft)) == (gen, disc, stft)


def test_incomplete_metadata():
    with pytest.raises(VersionMismatch):
        configs_from_metadata({"g.n_blocks": 3})
