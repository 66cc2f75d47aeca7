import numpy as np
import pytest

from bistream import (
    ConvWeights,
    add,
    concat_channels,
    conv2d,
    pixel_shuffle,
    relu6,
    slice_channels,
)
from bistream.errors import ConfigError
from conftest import random_frames
from oracles import conv2d_naive, pixel_shuffle_naive


def test_conv_identity_kernel():
    x = np.ones((1, 3, 3), np.float32)
    kern = np.zeros((1, 1, 3, 3), np.float32)
    kern[0, 0, 1, 1] = 1.0
    w = ConvWeights(kern, np.zeros(1, np.float32), stride=1, padding=1)
    assert np.array_equal(conv2d(x, w), x)


def test_conv_zero_kernel_bias_plane():
    x = random_frames(1, 3, 5, 7, seed=2)[0]
    w = ConvWeights(np.zeros((4, 3, 3, 3), np.float32),
                    np.full(4, 0.75, np.float32), padding=1)
    out = conv2d(x, w)
    assert out.shape == (4, 5, 7)
    assert np.all(out == np.float32(0.75))


def test_conv_stride2_matches_naive_oracle():
    # seeded downsampling case: 4x8x8 input, 6x4x3x3 weights, stride 2, pad 1
    rng = np.random.Generator(np.random.PCG64(123))
    x = rng.standard_normal((4, 8, 8)).astype(np.float32)
    kern = rng.standard_normal((6, 4, 3, 3)).astype(np.float32)
    bias = rng.standard_normal(6).astype(np.float32)
    w = ConvWeights(kern, bias, stride=2, padding=1)
    ref = conv2d_naive(x, kern, bias, 2, 1)
    assert ref.shape == (6, 4, 4)
    assert np.array_equal(conv2d(x, w), ref)


@pytest.mark.parametrize("case", range(12))
def test_conv_random_cases_bit_equal(case):
    rng = np.random.Generator(np.random.PCG64(1000 + case))
    ci = int(rng.integers(1, 9))
    co = int(rng.integers(1, 9))
    k = int(rng.choice([1, 3]))
    stride = int(rng.choice([1, 2]))
    pad = k // 2
    h, wd = (int(v) for v in rng.integers(4, 11, 2))
    x = rng.standard_normal((ci, h, wd)).astype(np.float32)
    kern = rng.standard_normal((co, ci, k, k)).astype(np.float32)
    bias = rng.standard_normal(co).astype(np.float32)
    w = ConvWeights(kern, bias, stride=stride, padding=pad)
    assert np.array_equal(conv2d(x, w), conv2d_naive(x, kern, bias, stride, pad))


def test_conv_is_pure():
    x = random_frames(1, 2, 6, 6, seed=5)[0]
    w = ConvWeights(np.random.default_rng(5).standard_normal((3, 2, 3, 3)).astype(np.float32),
                    np.zeros(3, np.float32), padding=1)
    assert np.array_equal(conv2d(x, w), conv2d(x, w))


def test_conv_channel_mismatch():
    x = np.zeros((2, 4, 4), np.float32)
    w = ConvWeights(np.zeros((1, 3, 3, 3), np.float32), np.zeros(1, np.float32), padding=1)
    with pytest.raises(ConfigError):
        conv2d(x, w)


def test_conv_empty_output_rejected():
    x = np.zeros((1, 2, 2), np.float32)
    w = ConvWeights(np.zeros((1, 1, 3, 3), np.float32), np.zeros(1, np.float32), padding=0)
    with pytest.raises(ConfigError):
        conv2d(x, w)


def test_relu6_clamps():
    x = np.array([[[7.0, -1.0, 3.5, 6.0, 0.0]]], np.float32)
    out = relu6(x)
    assert out.tolist() == [[[6.0, 0.0, 3.5, 6.0, 0.0]]]


def test_pixel_shuffle_unit_definition():
    x = np.array([1.0, 2.0, 3.0, 4.0], np.float32).reshape(4, 1, 1)
    out = pixel_shuffle(x, 2)
    assert np.array_equal(out, np.array([[[1.0, 2.0], [3.0, 4.0]]], np.float32))


def test_pixel_shuffle_factor_one_identity():
    x = random_frames(1, 3, 4, 4, seed=9)[0]
    assert np.array_equal(pixel_shuffle(x, 1), x)


def test_pixel_shuffle_matches_index_oracle():
    x = random_frames(1, 8, 2, 2, seed=11)[0]
    out = pixel_shuffle(x, 2)
    assert out.shape == (2, 4, 4)
    assert np.array_equal(out, pixel_shuffle_naive(x, 2))


def test_pixel_shuffle_inverse_roundtrip():
    x = random_frames(1, 8, 3, 5, seed=13)[0]
    out = pixel_shuffle(x, 2)
    # invert via the index formula
    back = np.empty_like(x)
    for c in range(2):
        for dy in range(2):
            for dx in range(2):
                back[c * 4 + dy * 2 + dx] = out[c, dy::2, dx::2]
    assert np.array_equal(back, x)


def test_pixel_shuffle_indivisible():
    with pytest.raises(ConfigError):
        pixel_shuffle(np.zeros((6, 2, 2), np.float32), 2)


def test_concat_and_slice_definition():
    a = random_frames(1, 2, 3, 3, seed=1)[0]
    b = random_frames(1, 3, 3, 3, seed=2)[0]
    cat = concat_channels([a, b])
    assert cat.shape == (5, 3, 3)
    assert np.array_equal(cat[:2], a)
    assert np.array_equal(cat[2:], b)
    assert np.array_equal(slice_channels(cat, 0, 2), a)


def test_concat_single_identity():
    a = random_frames(1, 2, 4, 4, seed=3)[0]
    assert np.array_equal(concat_channels([a]), a)


def test_concat_slice_partition_identity():
    x = random_frames(1, 7, 4, 4, seed=4)[0]
    for split in (1, 3, 6):
        rebuilt = concat_channels([slice_channels(x, 0, split), slice_channels(x, split, 7)])
        assert np.array_equal(rebuilt, x)


def test_slice_full_range_identity():
    x = random_frames(1, 5, 4, 4, seed=6)[0]
    assert np.array_equal(slice_channels(x, 0, 5), x)


def test_slice_shift_ratio_eight():
    # a 64-channel map with r=8 shifts f=8 channels off each end
    x = random_frames(1, 64, 2, 2, seed=7)[0]
    f = 64 // 8
    assert np.array_equal(slice_channels(x, 0, f), x[0:8])
    assert np.array_equal(slice_channels(x, 64 - f, 64), x[56:64])


def test_slice_out_of_range():
    x = np.zeros((3, 2, 2), np.float32)
    for start, end in ((-1, 2), (0, 4), (2, 2)):
        with pytest.raises(ConfigError):
            slice_channels(x, start, end)


def test_concat_spatial_mismatch():
    with pytest.raises(ConfigError):
        concat_channels([np.zeros((1, 2, 2), np.float32), np.zeros((1, 3, 2), np.float32)])


def test_add_identities():
    a = random_frames(1, 3, 4, 4, seed=8)[0]
    z = np.zeros_like(a)
    assert np.array_equal(add(a, z), a)
    assert np.all(add(a, -a) == 0.0)
    b = random_frames(1, 3, 4, 4, seed=9)[0]
    assert np.array_equal(add(a, b), add(b, a))


def test_add_dim_mismatch():
    with pytest.raises(ConfigError):
        add(np.zeros((1, 2, 2), np.float32), np.zeros((1, 2, 3), np.float32))
