import struct

import numpy as np
import pytest
import torch

from pcdown.checkpoint import (
    MAGIC,
    load_checkpoint,
    load_into_modules,
    save_checkpoint,
    save_model,
)
from pcdown.config import RunConfig, preset
from pcdown.errors import ConfigurationError
from pcdown.sampling import DownsampleNet
from pcdown.tasks import PointNetClassifier


def blobs(seed=0):
    rng = np.random.default_rng(seed)
    return {
        "weight": rng.normal(size=(3, 4)).astype(np.float32),
        "bias": rng.normal(size=(4,)).astype(np.float32),
        "scalar": np.float32(2.5).reshape(()),
        "cube": rng.normal(size=(2, 3, 2)).astype(np.float32),
    }


def test_round_trip_blobs_and_config(tmp_path):
    path = tmp_path / "model.ckpt"
    cfg = preset("classification", m=8, seed=7)
    params = blobs()
    save_checkpoint(path, params, cfg)
    loaded, loaded_cfg = load_checkpoint(path)
    assert loaded_cfg == cfg
    assert set(loaded) == set(params)
    for name in params:
        assert loaded[name].dtype == np.float32
        assert loaded[name].shape == params[name].shape  # 0-dim stays 0-dim
        np.testing.assert_array_equal(loaded[name], params[name])


def test_header_layout(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, {}, RunConfig())
    data = path.read_bytes()
    assert data[:5] == MAGIC
    version, cfg_len = struct.unpack_from("<II", data, 5)
    assert version == 1
    text = data[13 : 13 + cfg_len].decode()
    assert text.startswith("task=")
    # empty blob table: a zero count and nothing after it
    assert struct.unpack_from("<I", data, 13 + cfg_len) == (0,)
    assert len(data) == 13 + cfg_len + 4


def test_float64_input_is_stored_as_float32(tmp_path):
    path = tmp_path / "model.ckpt"
    value = np.array([0.1, 0.2], dtype=np.float64)
    save_checkpoint(path, {"v": value}, RunConfig())
    loaded, _ = load_checkpoint(path)
    np.testing.assert_array_equal(loaded["v"], value.astype(np.float32))


def test_non_contiguous_input(tmp_path):
    path = tmp_path / "model.ckpt"
    base = np.arange(12, dtype=np.float32).reshape(3, 4)
    transposed = base.T
    assert not transposed.flags["C_CONTIGUOUS"]
    save_checkpoint(path, {"t": transposed}, RunConfig())
    loaded, _ = load_checkpoint(path)
    np.testing.assert_array_equal(loaded["t"], transposed)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOPE1" + b"\x00" * 16)
    with pytest.raises(ConfigurationError, match="magic"):
        load_checkpoint(path)


def test_bad_version(tmp_path):
    path = tmp_path / "future.ckpt"
    save_checkpoint(path, {}, RunConfig())
    data = bytearray(path.read_bytes())
    data[5] = 9
    path.write_bytes(bytes(data))
    with pytest.raises(ConfigurationError, match="version"):
        load_checkpoint(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "long.ckpt"
    save_checkpoint(path, blobs(), RunConfig())
    path.write_bytes(path.read_bytes() + b"xx")
    with pytest.raises(ConfigurationError, match="trailing"):
        load_checkpoint(path)


# --- whole-model save / load -----------------------------------------------------


def tiny_modules(seed):
    torch.manual_seed(seed)
    sampler = DownsampleNet(m_max=4, encoder_widths=(8, 8), score_widths=(8,))
    head = PointNetClassifier(3, point_widths=(8, 16), fc_widths=(8,))
    return sampler, head


def test_save_model_round_trip(tmp_path):
    path = tmp_path / "model.ckpt"
    sampler, head = tiny_modules(0)
    cfg = preset("classification", m=4)
    save_model(path, cfg, sampler, head)

    params, loaded_cfg = load_checkpoint(path)
    sampler2, head2 = tiny_modules(99)  # different init, will be overwritten
    load_into_modules(params, sampler2, head2)

    assert loaded_cfg == cfg
    pts = torch.from_numpy(np.random.default_rng(1).normal(size=(2, 10, 3))).float()
    sampler.eval(), sampler2.eval(), head.eval(), head2.eval()
    with torch.no_grad():
        torch.testing.assert_close(sampler2(pts), sampler(pts), rtol=0, atol=0)
        torch.testing.assert_close(head2(pts), head(pts), rtol=0, atol=0)


def test_integer_buffers_survive(tmp_path):
    # BatchNorm tracks batches in an int64 buffer; it is stored as float32
    # and cast back on load
    path = tmp_path / "model.ckpt"
    sampler, head = tiny_modules(2)
    head.train()
    head(torch.randn(4, 6, 3))  # bump num_batches_tracked to 1
    save_model(path, RunConfig(m=4), sampler, head)
    params, _ = load_checkpoint(path)
    sampler2, head2 = tiny_modules(3)
    load_into_modules(params, sampler2, head2)
    tracked = [
        (name, buf)
        for name, buf in head2.state_dict().items()
        if name.endswith("num_batches_tracked")
    ]
    assert tracked
    for name, buf in tracked:
        assert buf.dtype == torch.int64
        assert buf.item() == 1


def test_load_into_modules_missing_key(tmp_path):
    path = tmp_path / "model.ckpt"
    sampler, head = tiny_modules(4)
    save_model(path, RunConfig(m=4), sampler, head)
    params, _ = load_checkpoint(path)
    params.pop(sorted(k for k in params if k.startswith("sampler."))[0])
    with pytest.raises(ConfigurationError, match="missing parameter"):
        load_into_modules(params, *tiny_modules(5))


def test_load_into_modules_shape_mismatch(tmp_path):
    path = tmp_path / "model.ckpt"
    sampler, head = tiny_modules(6)
    save_model(path, RunConfig(m=4), sampler, head)
    params, _ = load_checkpoint(path)
    other_sampler = DownsampleNet(m_max=4, encoder_widths=(16, 8), score_widths=(8,))
    with pytest.raises(ConfigurationError, match="shape"):
        load_into_modules(params, other_sampler, head)
