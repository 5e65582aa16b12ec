"""Luma-plane ingestion from Y4M and headerless planar YUV, plus 2x box downsampling."""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    DimensionError,
    FormatError,
    OutOfRangeError,
    SizeMismatchError,
    TruncationError,
    UnsupportedFormatError,
)

Y4M_MAGIC = b"YUV4MPEG2"
FRAME_MARKER = b"FRAME"

# Y4M colorspace tag -> (pixel_format, bit_depth)
Y4M_COLORSPACES = {
    "420": ("yuv420p", 8),
    "420jpeg": ("yuv420p", 8),
    "420mpeg2": ("yuv420p", 8),
    "420paldv": ("yuv420p", 8),
    "420p10": ("yuv420p10le", 10),
}
SUPPORTED_Y4M_TAGS = ("420", "420mpeg2", "420p10")

PIXEL_FORMATS = {"yuv420p": 8, "yuv420p10le": 10}


@dataclass(frozen=True)
class LumaFrame:
    """One decoded luma plane. ``samples`` is an (height, width) integer array."""

    width: int
    height: int
    bit_depth: int
    samples: np.ndarray

    def __post_init__(self):
        if self.bit_depth not in (8, 10):
            raise UnsupportedFormatError(f"bit depth {self.bit_depth} not supported")
        s = np.asarray(self.samples)
        if s.shape != (self.height, self.width):
            raise DimensionError(
                f"samples shape {s.shape} != ({self.height}, {self.width})"
            )
        if s.size and (s.min() < 0 or s.max() > self.peak):
            raise OutOfRangeError(f"sample outside [0, {self.peak}]")
        s = s.astype(np.uint16, copy=False)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def peak(self) -> int:
        return (1 << self.bit_depth) - 1

    @classmethod
    def from_array(cls, arr, bit_depth: int) -> "LumaFrame":
        arr = np.asarray(arr)
        return cls(arr.shape[1], arr.shape[0], bit_depth, arr)

    def as_float(self) -> np.ndarray:
        return self.samples.astype(np.float64)


@dataclass(frozen=True)
class VideoMeta:
    width: int
    height: int
    frame_rate: Fraction
    bit_depth: int
    pixel_format: str
    frame_count: int

    def __post_init__(self):
        if self.width % 2 or self.height % 2:
            raise UnsupportedFormatError("4:2:0 requires even width and height")
        if self.frame_count < 1:
            raise FormatError("stream holds no frames")


def _frame_layout(width, height, pixel_format):
    """Return (bytes per sample, luma bytes, total bytes) for one 4:2:0 frame."""
    if pixel_format not in PIXEL_FORMATS:
        raise UnsupportedFormatError(f"pixel format {pixel_format!r} not supported")
    bps = 2 if PIXEL_FORMATS[pixel_format] > 8 else 1
    luma = width * height * bps
    chroma = 2 * (width // 2) * (height // 2) * bps
    return bps, luma, luma + chroma


def _decode_luma(buf, width, height, bit_depth, index):
    if bit_depth > 8:
        plane = np.frombuffer(buf, dtype="<u2").reshape(height, width)
        if plane.max(initial=0) > (1 << bit_depth) - 1:
            raise OutOfRangeError(
                f"frame {index}: sample exceeds {(1 << bit_depth) - 1}"
            )
    else:
        plane = np.frombuffer(buf, dtype=np.uint8).reshape(height, width)
    return LumaFrame(width, height, bit_depth, plane)


def parse_y4m_header(line: bytes) -> VideoMeta:
    """Parse the stream header line (without trailing newline)."""
    tokens = line.split(b" ")
    if tokens[0] != Y4M_MAGIC:
        raise FormatError(f"bad Y4M magic {tokens[0][:16]!r}")
    width = height = None
    rate = Fraction(25, 1)
    colorspace = "420"
    for tok in tokens[1:]:
        if not tok:
            continue
        key, val = chr(tok[0]), tok[1:].decode("ascii")
        if key == "W":
            width = int(val)
        elif key == "H":
            height = int(val)
        elif key == "F":
            num, den = val.split(":")
            rate = Fraction(int(num), int(den))
        elif key == "C":
            colorspace = val
    if width is None or height is None:
        raise FormatError("Y4M header lacks W or H")
    if colorspace not in SUPPORTED_Y4M_TAGS:
        raise UnsupportedFormatError(f"Y4M colorspace C{colorspace} not supported")
    pixfmt, depth = Y4M_COLORSPACES[colorspace]
    # frame_count is patched in by open_y4m once the payload size is known
    return VideoMeta(width, height, rate, depth, pixfmt, 1)


def open_y4m(path) -> tuple[VideoMeta, Iterator[LumaFrame]]:
    """Open a Y4M file and return its metadata and a lazy luma-frame iterator.

    ``frame_count`` assumes parameterless FRAME markers; a short final frame
    is counted and raises :class:`TruncationError` when iterated.
    """
    path = os.fspath(path)
    with open(path, "rb") as fh:
        head = fh.read(len(Y4M_MAGIC))
        if head != Y4M_MAGIC:
            raise FormatError(f"bad Y4M magic {head!r}")
        fh.seek(0)
        header = fh.readline()
        if not header.endswith(b"\n"):
            raise FormatError("unterminated Y4M header")
        meta = parse_y4m_header(header[:-1])
    _, luma_bytes, frame_bytes = _frame_layout(meta.width, meta.height, meta.pixel_format)
    payload = os.path.getsize(path) - len(header)
    stride = len(FRAME_MARKER) + 1 + frame_bytes
    count = -(-payload // stride)
    meta = VideoMeta(meta.width, meta.height, meta.frame_rate, meta.bit_depth,
                     meta.pixel_format, count)
    return meta, _iter_y4m(path, len(header), meta, luma_bytes, frame_bytes)


def _iter_y4m(path, offset, meta, luma_bytes, frame_bytes):
    with open(path, "rb") as fh:
        fh.seek(offset)
        index = 0
        while True:
            marker = fh.readline()
            if not marker:
                return
            if not marker.startswith(FRAME_MARKER):
                raise FormatError(f"frame {index}: missing FRAME marker")
            buf = fh.read(frame_bytes)
            if len(buf) < frame_bytes:
                raise TruncationError(index)
            yield _decode_luma(buf[:luma_bytes], meta.width, meta.height,
                               meta.bit_depth, index)
            index += 1


def read_y4m(path) -> tuple[VideoMeta, list[LumaFrame]]:
    meta, frames = open_y4m(path)
    return meta, list(frames)


def write_y4m(path, frames: Sequence[LumaFrame], frame_rate=Fraction(30, 1)):
    """Write luma frames as 4:2:0 Y4M with neutral (mid-code) chroma."""
    if not frames:
        raise FormatError("cannot write an empty stream")
    first = frames[0]
    w, h, depth = first.width, first.height, first.bit_depth
    if w % 2 or h % 2:
        raise UnsupportedFormatError("4:2:0 requires even width and height")
    tag = "420p10" if depth == 10 else "420"
    rate = Fraction(frame_rate)
    dtype = "<u2" if depth > 8 else np.uint8
    chroma = np.full(2 * (w // 2) * (h // 2), 1 << (depth - 1), dtype=dtype).tobytes()
    with open(path, "wb") as fh:
        fh.write(f"YUV4MPEG2 W{w} H{h} F{rate.numerator}:{rate.denominator} "
                 f"Ip A1:1 C{tag}\n".encode("ascii"))
        for fr in frames:
            if (fr.width, fr.height, fr.bit_depth) != (w, h, depth):
                raise DimensionError("all frames must share dimensions and bit depth")
            fh.write(FRAME_MARKER + b"\n")
            fh.write(fr.samples.astype(dtype).tobytes())
            fh.write(chroma)


def read_raw_yuv(path, width: int, height: int, pixel_format: str) -> list[LumaFrame]:
    """Read a headerless planar 4:2:0 file; chroma is skipped."""
    if width <= 0 or height <= 0 or width % 2 or height % 2:
        raise DimensionError(f"raw YUV needs positive even dims, got {width}x{height}")
    _, luma_bytes, frame_bytes = _frame_layout(width, height, pixel_format)
    depth = PIXEL_FORMATS[pixel_format]
    size = os.path.getsize(path)
    if size == 0 or size % frame_bytes:
        raise SizeMismatchError(
            f"{path}: size {size} is not a multiple of the frame size {frame_bytes}"
        )
    data = np.fromfile(path, dtype=np.uint8)
    return [
        _decode_luma(data[i * frame_bytes:i * frame_bytes + luma_bytes].tobytes(),
                     width, height, depth, i)
        for i in range(size // frame_bytes)
    ]


def write_raw_yuv(path, frames: Sequence[LumaFrame]):
    first = frames[0]
    depth = first.bit_depth
    dtype = "<u2" if depth > 8 else np.uint8
    chroma = np.full(2 * (first.width // 2) * (first.height // 2), 1 << (depth - 1),
                     dtype=dtype).tobytes()
    with open(path, "wb") as fh:
        for fr in frames:
            fh.write(fr.samples.astype(dtype).tobytes())
            fh.write(chroma)


def load_video(path, width=None, height=None, pixel_format=None) -> list[LumaFrame]:
    """Dispatch on extension: ``.y4m`` is self-describing, anything else is raw."""
    if os.fspath(path).lower().endswith(".y4m"):
        return read_y4m(path)[1]
    if width is None or height is None or pixel_format is None:
        raise FormatError(f"{path}: raw YUV requires width, height and pixfmt")
    return read_raw_yuv(path, int(width), int(height), pixel_format)


def downsample2(frame) -> np.ndarray:
    """2x2 box average; a trailing odd row/column is dropped.

    Accepts a :class:`LumaFrame` or any 2-D array and returns float64.
    """
    x = frame.as_float() if isinstance(frame, LumaFrame) else np.asarray(frame, dtype=np.float64)
    h, w = x.shape
    if h < 2 or w < 2:
        raise DimensionError(f"downsample2 needs at least 2x2, got {w}x{h}")
    x = x[: h - h % 2, : w - w % 2]
    return 0.25 * (x[0::2, 0::2] + x[0::2, 1::2] + x[1::2, 0::2] + x[1::2, 1::2])
