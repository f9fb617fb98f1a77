import numpy as np
import pytest

from pvnext.checkpoint import encode_checkpoint, load_checkpoint, load_config, save_checkpoint, sidecar_path
from pvnext.errors import BadMagicError, ConfigError, TruncatedFileError, VersionMismatchError
from pvnext.models import micro_preset
from pvnext.network import PvNeXt


@pytest.fixture
def saved(tmp_path, micro_cfg):
    model = PvNeXt(micro_cfg, seed=11)
    path = tmp_path / "model.pvnx"
    save_checkpoint(path, model)
    return path, model


def test_round_trip_is_bit_identical(saved, micro_cfg):
    path, model = saved
    loaded = load_checkpoint(path, micro_cfg)
    for (name, a), (other, b) in zip(model.named_parameters(), loaded.named_parameters()):
        assert name == other
        assert np.array_equal(a.data, b.data)
    assert encode_checkpoint(loaded) == path.read_bytes()


def test_sidecar_config(saved, micro_cfg):
    path, _ = saved
    assert sidecar_path(path).exists()
    assert load_config(path) == micro_cfg
    assert load_checkpoint(path).cfg == micro_cfg


def test_header_layout(saved):
    raw = saved[0].read_bytes()
    assert raw[:4] == b"PVNX"
    assert int.from_bytes(raw[4:6], "little") == 1
    name_len = int.from_bytes(raw[38:40], "little")
    assert raw[40 : 40 + name_len] == b"stages.0.encoder.0.weight"


def test_digest_mismatch(saved):
    path, _ = saved
    with pytest.raises(ConfigError) as info:
        load_checkpoint(path, micro_preset(num_classes=3, imitator_k=5))
    assert info.value.code == "digest_mismatch"


def test_corrupted_header(saved):
    path, _ = saved
    raw = bytearray(path.read_bytes())
    raw[0] = ord("Q")
    path.write_bytes(bytes(raw))
    with pytest.raises(BadMagicError):
        load_checkpoint(path)


def test_version_mismatch(saved):
    path, _ = saved
    raw = bytearray(path.read_bytes())
    raw[4] = 9
    path.write_bytes(bytes(raw))
    with pytest.raises(VersionMismatchError):
        load_checkpoint(path)


def test_truncated_record(saved):
    path, _ = saved
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(TruncatedFileError):
        load_checkpoint(path)
