"""Synthetic videos, controlled distortions, and brute-force oracles for desk-scale checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy import ndimage
from scipy.special import gammaln

from .errors import ConfigError, DegenerateInputError, DimensionError
from .framio import LumaFrame
from .nss import GgdParams

PATTERNS = ("ramp", "zoneplate", "noise_texture", "moving_texture")
KINDS = ("blur", "awgn", "quantize", "black_crush", "white_clip")

# Five severities per kind. awgn is in 10-bit code units and is rescaled
# for other bit depths; quantize counts dropped LSBs.
SUITE_LEVELS = {
    "blur": (0.6, 1.0, 1.5, 2.2, 3.2),
    "awgn": (3.0, 6.0, 12.0, 24.0, 48.0),
    "quantize": (2, 3, 4, 5, 6),
    "black_crush": (0.02, 0.05, 0.1, 0.15, 0.2),
    "white_clip": (0.02, 0.05, 0.1, 0.15, 0.2),
}


@dataclass(frozen=True)
class DistortionSpec:
    kind: str
    level: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown distortion kind {self.kind!r}")
        if not self.level >= 0:
            raise ConfigError("distortion level must be >= 0")
        if self.kind == "quantize" and self.level != int(self.level):
            raise ConfigError("quantize level counts dropped bits and must be an integer")
        if self.kind in ("black_crush", "white_clip") and self.level > 1:
            raise ConfigError("clip levels are fractions of the code range")


def _stretch(field, peak, spread=0.22):
    """Standardize a field and map mean to mid-code with clipping at both ends."""
    z = (field - field.mean()) / (field.std() or 1.0)
    return np.clip(np.rint((0.5 + spread * z) * peak), 0, peak)


def _texture(rng, h, w, scales=(1.0, 2.5, 6.0, 14.0)):
    out = np.zeros((h, w))
    for k, s in enumerate(scales):
        layer = ndimage.gaussian_filter(rng.standard_normal((h, w)), s, mode="wrap")
        out += layer / (layer.std() or 1.0) * (1.0 + k)
    return out


def gen_video(pattern: str, w: int, h: int, frames: int, bit_depth: int = 10,
              seed: int = 0, grain: float = 0.0) -> list[LumaFrame]:
    """Deterministic synthetic luma sequence.

    ``grain`` adds i.i.d. Gaussian sensor-like noise (std in 10-bit code
    units) before rounding; a pure ramp has one-signed vertical MSCN
    products, so NR features need some grain on it.
    """
    if w % 2 or h % 2 or w <= 0 or h <= 0:
        raise DimensionError(f"synthetic video dims must be positive and even, got {w}x{h}")
    if frames < 5:
        raise ConfigError("synthetic videos need at least 5 frames")
    if pattern not in PATTERNS:
        raise ConfigError(f"unknown pattern {pattern!r}")
    peak = (1 << bit_depth) - 1
    rng = np.random.default_rng([int(seed), PATTERNS.index(pattern)])
    jj, ii = np.meshgrid(np.arange(w), np.arange(h))
    out = []
    if pattern == "ramp":
        # horizontal ramp that scrolls (and wraps) a few columns per frame
        step = int(rng.integers(1, max(2, w // 16))) * (1 if rng.random() < 0.5 else -1)
        for t in range(frames):
            col = (np.arange(w) + step * t) % w
            row = np.rint(col / (w - 1) * peak)
            out.append(np.broadcast_to(row, (h, w)))
    elif pattern == "zoneplate":
        cy, cx = (h - 1) / 2 + rng.uniform(-2, 2), (w - 1) / 2 + rng.uniform(-2, 2)
        r2 = (ii - cy) ** 2 + (jj - cx) ** 2
        k = rng.uniform(0.5, 1.0) * math.pi / (2 * max(h, w))
        speed = rng.uniform(0.1, 0.5)
        for t in range(frames):
            out.append(np.rint((0.5 + 0.5 * np.cos(k * r2 + speed * t)) * peak))
    elif pattern == "noise_texture":
        a, b = _texture(rng, h, w), _texture(rng, h, w)
        for t in range(frames):
            th = 0.08 * t
            out.append(_stretch(math.cos(th) * a + math.sin(th) * b, peak, spread=0.25))
    else:
        base = _texture(rng, h, w, scales=(1.5, 4.0))
        for _ in range(12):
            y0, x0 = rng.integers(0, h), rng.integers(0, w)
            rh, rw = rng.integers(h // 10, h // 3), rng.integers(w // 10, w // 3)
            sl = (slice(y0, y0 + rh), slice(x0, x0 + rw))
            base[sl] = rng.uniform(-4, 4) + 0.3 * base[sl]
        img = _stretch(base, peak, spread=0.25)
        for t in range(frames):
            out.append(np.roll(img, (t, 2 * t), axis=(0, 1)))
    video = [LumaFrame(w, h, bit_depth, f.astype(np.uint16)) for f in out]
    return add_grain(video, grain, [int(seed), PATTERNS.index(pattern)])


def add_grain(video: list[LumaFrame], grain: float, key) -> list[LumaFrame]:
    """Add rounded Gaussian noise (std in 10-bit code units) keyed by ``key`` and frame index."""
    if grain <= 0:
        return list(video)
    out = []
    for k, fr in enumerate(video):
        rng = np.random.default_rng([*np.atleast_1d(key).tolist(), k, 1])
        sd = grain * fr.peak / 1023.0
        y = np.clip(np.rint(fr.samples + sd * rng.standard_normal(fr.samples.shape)), 0, fr.peak)
        out.append(LumaFrame(fr.width, fr.height, fr.bit_depth, y.astype(np.uint16)))
    return out


def _distort_frame(x, spec, peak, bit_depth, index):
    level = spec.level
    if spec.kind == "blur":
        y = ndimage.gaussian_filter(x.astype(np.float64), level, mode="reflect", truncate=4.0)
        return np.clip(np.rint(y), 0, peak)
    if spec.kind == "awgn":
        sd = level * peak / 1023.0
        noise = np.random.default_rng([int(spec.seed), index]).standard_normal(x.shape)
        return np.clip(np.rint(x + sd * noise), 0, peak)
    if spec.kind == "quantize":
        n = int(level)
        return (x.astype(np.int64) >> n) << n
    if spec.kind == "black_crush":
        return np.maximum(x, math.ceil(level * peak))
    return np.minimum(x, math.floor((1 - level) * peak))


def distort(video: list[LumaFrame], spec: DistortionSpec) -> list[LumaFrame]:
    """Apply one distortion frame by frame; level 0 returns the input frames unchanged."""
    if spec.level == 0:
        return list(video)
    out = []
    for k, fr in enumerate(video):
        y = _distort_frame(fr.samples, spec, fr.peak, fr.bit_depth, k)
        out.append(LumaFrame(fr.width, fr.height, fr.bit_depth, np.asarray(y).astype(np.uint16)))
    return out


@dataclass(frozen=True)
class SuiteEntry:
    video_id: str
    content_id: str
    pattern: str
    variant: int
    kind: str
    level: float
    severity: int

    @property
    def mos(self) -> float:
        return -float(self.severity)


def content_name(pattern: str, variant: int) -> str:
    return f"{pattern}-{variant}"


def content_seed(seed: int, variant: int) -> int:
    return int(seed) + 7919 * int(variant)


def suite_entries(patterns=PATTERNS, kinds=KINDS, levels=None, variants: int = 1) -> list[SuiteEntry]:
    """Pristine source plus every (kind, severity), for each pattern variant."""
    levels = levels or SUITE_LEVELS
    entries = []
    for p in patterns:
        for v in range(variants):
            c = content_name(p, v)
            entries.append(SuiteEntry(f"{c}_pristine", c, p, v, "pristine", 0.0, 0))
            for kind in kinds:
                for sev, lv in enumerate(levels[kind], start=1):
                    entries.append(SuiteEntry(f"{c}_{kind}_{sev}", c, p, v, kind, float(lv), sev))
    return entries


SUITE_GRAIN = 1.0


def _finish(entry: SuiteEntry, source: list[LumaFrame], seed: int, grain: float) -> list[LumaFrame]:
    cseed = content_seed(seed, entry.variant)
    video = source if entry.kind == "pristine" else distort(source, DistortionSpec(entry.kind, entry.level, cseed))
    return add_grain(video, grain, [cseed, PATTERNS.index(entry.pattern)])


def suite_video(entry: SuiteEntry, w=256, h=256, frames=30, bit_depth=10, seed=0,
                grain=SUITE_GRAIN) -> list[LumaFrame]:
    """Build one suite entry on its own, identical to what iter_suite yields for it."""
    source = gen_video(entry.pattern, w, h, frames, bit_depth, content_seed(seed, entry.variant))
    return _finish(entry, source, seed, grain)


def iter_suite(w=256, h=256, frames=30, bit_depth=10, seed=0, patterns=PATTERNS,
               kinds=KINDS, levels=None, grain=SUITE_GRAIN, variants: int = 1) -> Iterator[tuple[SuiteEntry, list[LumaFrame]]]:
    """Yield (entry, video) lazily so a whole suite never sits in memory.

    Every video, pristine included, ends with the same per-content grain
    field, modelling a sensor noise floor added after the impairment.
    """
    source, current = None, None
    for e in suite_entries(patterns, kinds, levels, variants):
        if e.content_id != current:
            source = gen_video(e.pattern, w, h, frames, bit_depth, content_seed(seed, e.variant))
            current = e.content_id
        yield e, _finish(e, source, seed, grain)


def oracle_rank_corr(a, b) -> float:
    """Spearman correlation by O(n^2) pairwise ranking and an explicit Pearson sum."""
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    n = len(a)

    def ranks(x):
        r = []
        for i in range(n):
            below = sum(1 for j in range(n) if x[j] < x[i])
            ties = sum(1 for j in range(n) if x[j] == x[i])
            r.append(below + (ties + 1) / 2)
        return r

    ra, rb = ranks(a), ranks(b)
    ma, mb = sum(ra) / n, sum(rb) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(ra, rb))
    va = sum((x - ma) ** 2 for x in ra)
    vb = sum((y - mb) ** 2 for y in rb)
    return cov / math.sqrt(va * vb)


def ggd_loglik(samples, alpha, sigma) -> np.ndarray:
    """GGD log-likelihood on a broadcast grid of (alpha, sigma)."""
    x = np.abs(np.asarray(samples, dtype=np.float64).ravel())
    alpha = np.asarray(alpha, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    beta = sigma * np.exp(0.5 * (gammaln(1 / alpha) - gammaln(3 / alpha)))
    s = np.array([np.sum(x ** a) for a in np.ravel(alpha)]).reshape(alpha.shape)
    n = x.size
    return n * (np.log(alpha) - np.log(2 * beta) - gammaln(1 / alpha)) - s / beta**alpha


def oracle_ggd_fit(samples) -> GgdParams:
    """Grid maximum-likelihood GGD fit, coarse then fine, over (alpha, sigma)."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2 or np.ptp(x) == 0:
        raise DegenerateInputError("GGD oracle on zero-variance samples")
    rms = math.sqrt(float(np.mean(x * x)))
    a_lo, a_hi, a_step = 0.05, 10.0, 0.05
    s_lo, s_hi, s_step = 0.3 * rms, 3.0 * rms, 0.01 * rms
    best = None
    for _ in range(3):
        alphas = np.arange(a_lo, a_hi + a_step / 2, a_step)[:, None]
        sigmas = np.arange(s_lo, s_hi + s_step / 2, s_step)[None, :]
        ll = ggd_loglik(x, alphas, sigmas)
        i, j = np.unravel_index(np.argmax(ll), ll.shape)
        best = (float(alphas[i, 0]), float(sigmas[0, j]))
        a_lo, a_hi = max(0.05, best[0] - 2 * a_step), best[0] + 2 * a_step
        s_lo, s_hi = max(1e-12, best[1] - 2 * s_step), best[1] + 2 * s_step
        a_step /= 10
        s_step /= 10
    return GgdParams(alpha=best[0], sigma=best[1])
