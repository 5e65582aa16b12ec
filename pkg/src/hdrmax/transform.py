"""Local patch scaling, the expansive nonlinearity, and the additive-noise stage."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .errors import ConfigError, DimensionError
from .framio import LumaFrame


@dataclass(frozen=True)
class TransformConfig:
    patch_size: int = 31
    delta: float = 4.0
    noise_sigma: float = 0.001
    seed: int = 0
    noise_enabled: bool = True

    def __post_init__(self):
        if int(self.patch_size) != self.patch_size or self.patch_size < 2:
            raise ConfigError(f"patch_size must be an integer >= 2, got {self.patch_size}")
        if not self.delta > 0:
            raise ConfigError(f"delta must be > 0, got {self.delta}")
        if not self.noise_sigma >= 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")

    @property
    def effective_sigma(self) -> float:
        return float(self.noise_sigma) if self.noise_enabled else 0.0

    @property
    def peak(self) -> float:
        """Largest magnitude the nonlinearity can produce."""
        return float(np.expm1(self.delta))

    def with_overrides(self, **overrides) -> "TransformConfig":
        known = {f.name for f in fields(self)}
        return replace(self, **{k: v for k, v in overrides.items() if k in known and v is not None})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TransformConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown transform config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "TransformConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _as_float(frame) -> np.ndarray:
    if isinstance(frame, LumaFrame):
        return frame.as_float()
    return np.asarray(frame, dtype=np.float64)


def patch_scale(frame, patch_size: int) -> np.ndarray:
    """Map each non-overlapping ``patch_size`` square tile linearly onto [-1, 1].

    Tiles are anchored at the top-left; right/bottom tiles may be narrower.
    A constant tile maps to zeros.
    """
    x = _as_float(frame)
    if x.ndim != 2 or x.size == 0:
        raise DimensionError("patch_scale expects a non-empty 2-D frame")
    h, w = x.shape
    W = int(patch_size)
    nh, nw = -(-h // W), -(-w // W)
    # edge replication keeps each boundary tile's min/max unchanged
    padded = np.pad(x, ((0, nh * W - h), (0, nw * W - w)), mode="edge")
    tiles = padded.reshape(nh, W, nw, W)
    lo = tiles.min(axis=(1, 3))
    hi = tiles.max(axis=(1, 3))
    span = hi - lo
    flat = span == 0
    lo_full = np.repeat(np.repeat(lo, W, axis=0), W, axis=1)[:h, :w]
    span_full = np.repeat(np.repeat(np.where(flat, 1.0, span), W, axis=0), W, axis=1)[:h, :w]
    flat_full = np.repeat(np.repeat(flat, W, axis=0), W, axis=1)[:h, :w]
    # a single correctly rounded quotient keeps a*x+b inputs bit-identical
    # whenever the shifted values are exactly representable
    out = 2.0 * ((x - lo_full) / span_full) - 1.0
    out[flat_full] = 0.0
    return out


def expansive_nonlinearity(x, delta: float):
    """exp(delta*x) - 1 above zero, 1 - exp(-delta*x) below; odd and zero at 0."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.expm1(delta * np.abs(x))


def noise_field(shape, sigma: float, seed: int, frame_index: int) -> np.ndarray:
    """I.i.d. N(0, sigma^2) field that depends only on (seed, frame_index).

    Philox is counter based, so drawing the field of frame k never depends on
    which other frames were processed first.
    """
    key = np.array([int(seed), int(frame_index)], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    return sigma * rng.standard_normal(int(np.prod(shape))).reshape(shape)


def add_noise(frame, sigma: float, seed: int, frame_index: int) -> np.ndarray:
    p = np.asarray(frame, dtype=np.float64)
    if sigma == 0:
        return p.copy()
    return p + noise_field(p.shape, sigma, seed, frame_index)


def hdrmax(frame, cfg: TransformConfig, frame_index: int = 0) -> np.ndarray:
    """Full luma transform: patch scaling, nonlinearity, then noise if enabled."""
    p = expansive_nonlinearity(patch_scale(frame, cfg.patch_size), cfg.delta)
    if not cfg.noise_enabled:
        return p
    return add_noise(p, cfg.noise_sigma, cfg.seed, frame_index)
