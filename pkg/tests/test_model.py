import numpy as np
import pytest

from bistream import (
    Conv,
    FusionPoint,
    ModelConfig,
    NetDef,
    Relu6,
    SkipJoin,
    SkipSource,
    build_chain,
    build_wnet,
    forward_full_sequence,
    init_weights,
    load_model_config,
    load_weights,
    make_noise_map,
    save_model_config,
    save_weights,
)
from bistream.errors import (
    BadMagicError,
    BadVersionError,
    ConfigError,
    MissingTensorError,
    TensorMismatchError,
    TruncatedFileError,
)
from bistream.model import store_bytes
from conftest import random_frames


def _fusion_channels(net):
    return [fp.channels for fp in net.fusion_points()]


def test_wnet_base64_structure():
    net = build_wnet(ModelConfig(base_channels=64))
    assert len(net.fusion_points()) == 16
    assert net.output_channels == 3
    # channel ladder 64 / 128 / 256: fusion sits at the two downsampled widths
    assert sorted(set(_fusion_channels(net))) == [128, 256]
    widths = {c.out_channels for c in net.conv_stages()}
    assert {64, 128, 256, 512}.issubset(widths)


def test_wnet_base32_halves_ladder():
    net = build_wnet(ModelConfig(base_channels=32))
    assert len(net.fusion_points()) == 16
    assert sorted(set(_fusion_channels(net))) == [64, 128]
    assert net.output_channels == 3


def test_wnet_fusion_none_same_stages():
    bi = build_wnet(ModelConfig(base_channels=16))
    none = build_wnet(ModelConfig(base_channels=16, fusion_mode="none"))
    assert [type(s).__name__ for s in bi.stages] == [type(s).__name__ for s in none.stages]
    assert none.fusion_mode == "none"


def test_wnet_fusion_none_is_framewise():
    from conftest import changed_outputs

    net = build_wnet(ModelConfig(base_channels=8, fusion_mode="none"))
    store = init_weights(net, 4)
    frames = random_frames(3, 3, 8, 8, seed=44)
    run = lambda fr: forward_full_sequence(net, store, fr)
    assert changed_outputs(run, frames, 1) == [1]


def test_wnet_shift_width_follows_ratio():
    net = build_wnet(ModelConfig(base_channels=64, shift_ratio=8))
    for fp in net.fusion_points():
        assert fp.shifted == fp.channels // 8


def test_invalid_configs_rejected():
    with pytest.raises(ConfigError):
        build_wnet(ModelConfig(base_channels=4, shift_ratio=16))  # f would be 0
    with pytest.raises(ConfigError):
        ModelConfig(input_channels=2).validate()
    with pytest.raises(ConfigError):
        ModelConfig(fusion_mode="both").validate()
    with pytest.raises(ConfigError):
        build_chain(3, 4, 2, shift_ratio=2)  # channels - 2f == 0


def test_netdef_rejects_bad_wiring():
    with pytest.raises(ConfigError):
        NetDef([Conv("a", 3, 8), Relu6(), SkipJoin("x")], 3)
    with pytest.raises(ConfigError):
        NetDef([Conv("a", 3, 8), SkipSource("x")], 3)  # dangling source
    with pytest.raises(ConfigError):
        NetDef([Conv("a", 4, 8)], 3)  # channel mismatch
    with pytest.raises(ConfigError):
        NetDef([FusionPoint(8, 1)], 3)  # fusion width disagrees with feature


def test_init_weights_deterministic():
    net = build_chain(3, 8, 2)
    a = init_weights(net, 42)
    b = init_weights(net, 42)
    assert store_bytes(a) == store_bytes(b)
    c = init_weights(net, 43)
    assert store_bytes(a) != store_bytes(c)


def test_zero_init_output_is_bias_composition():
    net = build_chain(3, 8, 2)
    store = init_weights(net, 0, mode="zero")
    store["out.conv"].bias[:] = np.float32(0.37)
    frames = random_frames(3, 3, 8, 8, seed=1)
    outs = forward_full_sequence(net, store, frames)
    for out in outs:
        assert np.all(out == np.float32(0.37))


def test_weight_roundtrip_bitwise(tmp_path):
    net = build_wnet(ModelConfig(base_channels=8))
    store = init_weights(net, 7)
    path = tmp_path / "w.bwt"
    save_weights(store, path)
    loaded = load_weights(path, net)
    assert store_bytes(loaded) == store_bytes(store)
    save_weights(loaded, tmp_path / "w2.bwt")
    assert (tmp_path / "w.bwt").read_bytes() == (tmp_path / "w2.bwt").read_bytes()


def test_weight_load_errors(tmp_path):
    net = build_chain(3, 8, 1)
    store = init_weights(net, 7)
    path = tmp_path / "w.bwt"
    save_weights(store, path)
    blob = bytearray(path.read_bytes())

    bad = tmp_path / "bad.bwt"
    corrupted = bytearray(blob)
    corrupted[0] ^= 0xFF
    bad.write_bytes(corrupted)
    with pytest.raises(BadMagicError):
        load_weights(bad, net)

    versioned = bytearray(blob)
    versioned[8] = 9
    bad.write_bytes(versioned)
    with pytest.raises(BadVersionError):
        load_weights(bad, net)

    bad.write_bytes(blob[:-10])
    with pytest.raises(TruncatedFileError):
        load_weights(bad, net)


def test_weight_missing_tensor_names_stage(tmp_path):
    small = build_chain(3, 8, 1)
    store = init_weights(small, 7)
    path = tmp_path / "w.bwt"
    save_weights(store, path)
    bigger = build_chain(3, 8, 2)
    with pytest.raises(MissingTensorError, match="block1.conv"):
        load_weights(path, bigger)


def test_weight_dim_mismatch(tmp_path):
    net8 = build_chain(3, 8, 1)
    path = tmp_path / "w.bwt"
    save_weights(init_weights(net8, 7), path)
    net16 = build_chain(3, 16, 1)
    with pytest.raises(TensorMismatchError):
        load_weights(path, net16)


def test_make_noise_map():
    assert np.all(make_noise_map(0.0, 4, 4) == 0.0)
    nm = make_noise_map(25.5, 4, 6)
    assert nm.shape == (1, 4, 6)
    assert np.allclose(nm, 0.1)
    with pytest.raises(ConfigError):
        make_noise_map(-1.0, 4, 4)


def test_blind_config_has_no_map_channel():
    # C=3 means RGB only; the input layer consumes exactly 3 channels
    net = build_wnet(ModelConfig(base_channels=8, input_channels=3))
    assert net.input_channels == 3
    assert net.conv_stages()[0].in_channels == 3


def test_forward_shape_invariance():
    net = build_wnet(ModelConfig(base_channels=8))
    store = init_weights(net, 3)
    for h, w in ((8, 8), (8, 12), (16, 8)):
        outs = forward_full_sequence(net, store, random_frames(2, 3, h, w, seed=h * w))
        assert all(o.shape == (3, h, w) for o in outs)
    with pytest.raises(ConfigError):
        forward_full_sequence(net, store, random_frames(1, 3, 10, 10, seed=0))


def test_model_config_file_roundtrip(tmp_path):
    cfg = ModelConfig(base_channels=16, input_channels=4, shift_ratio=4,
                      fusion_mode="unidirectional")
    path = tmp_path / "model.cfg"
    save_model_config(cfg, path)
    loaded = load_model_config(path)
    assert loaded == cfg
    path.write_text("base_channels=16\nmystery=1\n")
    with pytest.raises(ConfigError):
        load_model_config(path)
