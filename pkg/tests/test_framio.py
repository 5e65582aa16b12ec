from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hdrmax.errors import (
    DimensionError,
    FormatError,
    OutOfRangeError,
    SizeMismatchError,
    TruncationError,
    UnsupportedFormatError,
)
from hdrmax.framio import (
    LumaFrame,
    downsample2,
    load_video,
    open_y4m,
    read_raw_yuv,
    read_y4m,
    write_raw_yuv,
    write_y4m,
)


def _y4m_bytes(header, frames, chroma_bytes):
    out = header + b"\n"
    for f in frames:
        out += b"FRAME\n" + f + b"\x80" * chroma_bytes
    return out


def test_header_10bit(tmp_path):
    p = tmp_path / "a.y4m"
    luma = np.zeros((256, 256), dtype="<u2").tobytes()
    p.write_bytes(_y4m_bytes(b"YUV4MPEG2 W256 H256 F30:1 C420p10", [luma], 256 * 256))
    meta, frames = open_y4m(p)
    assert (meta.width, meta.height, meta.frame_rate, meta.bit_depth, meta.pixel_format) == (
        256, 256, Fraction(30, 1), 10, "yuv420p10le")
    assert meta.frame_count == 1
    assert len(list(frames)) == 1


def test_bad_magic(tmp_path):
    p = tmp_path / "a.y4m"
    p.write_bytes(b"YUV4MPG W4 H4 F30:1 C420\nFRAME\n" + bytes(24))
    with pytest.raises(FormatError):
        open_y4m(p)


def test_unsupported_colorspace(tmp_path):
    p = tmp_path / "a.y4m"
    p.write_bytes(b"YUV4MPEG2 W4 H4 F30:1 C444\nFRAME\n" + bytes(48))
    with pytest.raises(UnsupportedFormatError):
        open_y4m(p)


def test_three_8bit_frames_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    planes = [rng.integers(0, 256, size=(4, 6), dtype=np.uint8) for _ in range(3)]
    p = tmp_path / "a.y4m"
    p.write_bytes(_y4m_bytes(b"YUV4MPEG2 W6 H4 F25:1 Ip A1:1 C420", [x.tobytes() for x in planes], 12))
    meta, frames = read_y4m(p)
    assert meta.frame_count == 3 and meta.bit_depth == 8
    assert len(frames) == 3
    for got, want in zip(frames, planes):
        np.testing.assert_array_equal(got.samples, want)


def test_c420mpeg2_accepted(tmp_path):
    p = tmp_path / "a.y4m"
    p.write_bytes(_y4m_bytes(b"YUV4MPEG2 W2 H2 F30:1 C420mpeg2", [bytes([1, 2, 3, 4])], 2))
    _, frames = read_y4m(p)
    np.testing.assert_array_equal(frames[0].samples, [[1, 2], [3, 4]])


def test_truncated_frame_names_index(tmp_path):
    p = tmp_path / "a.y4m"
    good = _y4m_bytes(b"YUV4MPEG2 W2 H2 F30:1 C420", [bytes(4), bytes(4)], 2)
    p.write_bytes(good[:-3])
    meta, frames = open_y4m(p)
    assert meta.frame_count == 2
    with pytest.raises(TruncationError) as exc:
        list(frames)
    assert exc.value.frame_index == 1


@settings(max_examples=25, deadline=None)
@given(
    depth=st.sampled_from([8, 10]),
    n=st.integers(1, 4),
    seed=st.integers(0, 2**32 - 1),
)
def test_y4m_write_read_roundtrip(tmp_path_factory, depth, n, seed):
    rng = np.random.default_rng(seed)
    peak = (1 << depth) - 1
    frames = [LumaFrame.from_array(rng.integers(0, peak + 1, size=(6, 8)), depth) for _ in range(n)]
    p = tmp_path_factory.mktemp("y4m") / "rt.y4m"
    write_y4m(p, frames)
    meta, back = read_y4m(p)
    assert meta.frame_count == n and meta.bit_depth == depth
    for a, b in zip(frames, back):
        np.testing.assert_array_equal(a.samples, b.samples)


def test_raw_10bit_little_endian(tmp_path):
    p = tmp_path / "a.yuv"
    luma = np.array([0, 512, 1023, 4], dtype="<u2").tobytes()
    chroma = np.array([512, 512], dtype="<u2").tobytes()
    p.write_bytes(luma + chroma)
    (frame,) = read_raw_yuv(p, 2, 2, "yuv420p10le")
    assert frame.samples.ravel().tolist() == [0, 512, 1023, 4]


def test_raw_empty_file(tmp_path):
    p = tmp_path / "a.yuv"
    p.write_bytes(b"")
    with pytest.raises(SizeMismatchError):
        read_raw_yuv(p, 2, 2, "yuv420p")


def test_raw_partial_frame(tmp_path):
    p = tmp_path / "a.yuv"
    p.write_bytes(bytes(7))
    with pytest.raises(SizeMismatchError):
        read_raw_yuv(p, 2, 2, "yuv420p")


def test_raw_two_8bit_frames(tmp_path):
    stride = 4 * 4 + 2 * 2 * 2
    p = tmp_path / "a.yuv"
    data = np.arange(2 * stride, dtype=np.uint8)
    p.write_bytes(data.tobytes())
    frames = read_raw_yuv(p, 4, 4, "yuv420p")
    assert len(frames) == 2
    np.testing.assert_array_equal(frames[1].samples.ravel(), data[stride:stride + 16])


def test_raw_rejects_out_of_range_10bit(tmp_path):
    p = tmp_path / "a.yuv"
    p.write_bytes(np.array([0, 1024, 3, 4, 0, 0], dtype="<u2").tobytes())
    with pytest.raises(OutOfRangeError):
        read_raw_yuv(p, 2, 2, "yuv420p10le")


def test_raw_rejects_odd_dims(tmp_path):
    p = tmp_path / "a.yuv"
    p.write_bytes(bytes(10))
    with pytest.raises(DimensionError):
        read_raw_yuv(p, 3, 2, "yuv420p")


def test_raw_roundtrip_and_dispatch(tmp_path):
    frames = [LumaFrame.from_array(np.full((4, 4), v), 10) for v in (0, 1023)]
    p = tmp_path / "a.yuv"
    write_raw_yuv(p, frames)
    back = load_video(p, 4, 4, "yuv420p10le")
    assert [int(f.samples[0, 0]) for f in back] == [0, 1023]
    with pytest.raises(FormatError):
        load_video(p)


def test_lumaframe_rejects_out_of_range():
    with pytest.raises(OutOfRangeError):
        LumaFrame.from_array(np.array([[0, 256]]), 8)


def test_downsample_constant():
    out = downsample2(LumaFrame.from_array(np.full((6, 8), 300), 10))
    assert out.shape == (3, 4)
    assert np.all(out == 300.0)


def test_downsample_block_mean():
    assert downsample2(np.array([[0, 2], [4, 6]])).tolist() == [[3.0]]


def test_downsample_drops_trailing_odd():
    x = np.arange(25.0).reshape(5, 5)
    out = downsample2(x)
    assert out.shape == (2, 2)
    assert out[1, 1] == np.mean([12, 13, 17, 18])


def test_downsample_too_small():
    with pytest.raises(DimensionError):
        downsample2(np.zeros((1, 4)))


frames_2d = arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(2, 12)),
                   elements=st.floats(-1e3, 1e3, allow_nan=False))


@settings(max_examples=60, deadline=None)
@given(frames_2d, st.floats(-1e3, 1e3))
def test_downsample_commutes_with_offset(x, c):
    np.testing.assert_allclose(downsample2(x + c), downsample2(x) + c, rtol=0, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_downsample_preserves_mean_on_even_dims(hh, ww, seed):
    x = np.random.default_rng(seed).normal(size=(2 * hh, 2 * ww))
    assert downsample2(x).mean() == pytest.approx(x.mean(), abs=1e-12)
