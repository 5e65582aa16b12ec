"""MSCN coefficients, GGD/AGGD moment fits, and per-video NR feature pooling.

Per-frame layout (36 values), repeated for scale 1 then scale 2::

    ggd_alpha, ggd_sigma,
    H_eta, H_nu, H_sigma_l, H_sigma_r,
    V_eta, V_nu, V_sigma_l, V_sigma_r,
    D1_eta, D1_nu, D1_sigma_l, D1_sigma_r,
    D2_eta, D2_nu, D2_sigma_l, D2_sigma_r

The pooled 72-vector is the 36 temporal means followed by the 36 mean
within-group standard deviations.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.special import gammaln

from .errors import DegenerateInputError, DimensionError, FrameFeatureError, InsufficientFramesError
from .framio import LumaFrame, downsample2
from .transform import TransformConfig, hdrmax

MSCN_WINDOW = 7
MSCN_SIGMA = 7 / 6
MSCN_C = 0.001
SHAPE_GRID = (0.05, 10.0, 0.001)
MIN_FIT_SAMPLES = 100
GROUP_SIZE = 5
ORIENTATIONS = ("H", "V", "D1", "D2")
SCALE_MODES = ("transform_then_downsample", "downsample_then_transform")

N_FRAME_FEATURES = 36
N_VIDEO_FEATURES = 72


def _per_scale_names():
    names = ["ggd_alpha", "ggd_sigma"]
    for o in ORIENTATIONS:
        names += [f"{o}_eta", f"{o}_nu", f"{o}_sigma_l", f"{o}_sigma_r"]
    return names


FRAME_FEATURE_NAMES = tuple(
    f"s{s}_{n}" for s in (1, 2) for n in _per_scale_names()
)
VIDEO_FEATURE_NAMES = tuple(f"mean_{n}" for n in FRAME_FEATURE_NAMES) + tuple(
    f"std_{n}" for n in FRAME_FEATURE_NAMES
)
CSV_FEATURE_COLUMNS = tuple(f"nr_hdrmax_{k:03d}" for k in range(N_VIDEO_FEATURES))


@dataclass(frozen=True)
class GgdParams:
    alpha: float
    sigma: float


@dataclass(frozen=True)
class AggdParams:
    eta: float
    nu: float
    sigma_l: float
    sigma_r: float


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """Unit-sum 1-D Gaussian taps centred on the middle sample."""
    r = (size - 1) / 2
    x = np.arange(size) - r
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _smooth(x, taps):
    y = ndimage.correlate1d(x, taps, axis=0, mode="reflect")
    return ndimage.correlate1d(y, taps, axis=1, mode="reflect")


def mscn(frame, c: float = MSCN_C) -> np.ndarray:
    """Mean-subtracted contrast-normalized coefficients (7x7 Gaussian, reflect borders)."""
    x = np.asarray(frame, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < MSCN_WINDOW or x.shape[1] < MSCN_WINDOW:
        raise DimensionError(f"MSCN needs at least {MSCN_WINDOW}x{MSCN_WINDOW}, got {x.shape}")
    # centring first keeps flat regions exactly zero and tames cancellation in var
    x = x - x.mean()
    taps = gaussian_window(MSCN_WINDOW, MSCN_SIGMA)
    mu = _smooth(x, taps)
    var = _smooth(x * x, taps) - mu * mu
    sigma = np.sqrt(np.maximum(var, 0.0))
    return (x - mu) / (sigma + c)


def pairwise_products(m) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Horizontal, vertical, main- and anti-diagonal neighbour products.

    D2 pairs (i, j) with (i+1, j-1), so it starts at column 1 rather than
    wrapping around.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise DimensionError("pairwise_products needs at least a 2x2 grid")
    h = m[:, :-1] * m[:, 1:]
    v = m[:-1, :] * m[1:, :]
    d1 = m[:-1, :-1] * m[1:, 1:]
    d2 = m[:-1, 1:] * m[1:, :-1]
    return h, v, d1, d2


@lru_cache(maxsize=1)
def _shape_table():
    lo, hi, step = SHAPE_GRID
    shapes = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
    # Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a)), increasing in a
    ratio = np.exp(2 * gammaln(2 / shapes) - gammaln(1 / shapes) - gammaln(3 / shapes))
    return shapes, ratio


def _match_shape(rho: float) -> float:
    shapes, ratio = _shape_table()
    return float(shapes[np.argmin(np.abs(ratio - rho))])


def fit_ggd(samples) -> GgdParams:
    """Moment-matching GGD fit (BRISQUE convention) over the shape grid."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < MIN_FIT_SAMPLES:
        raise DegenerateInputError(f"GGD fit needs >= {MIN_FIT_SAMPLES} samples, got {x.size}")
    ms = float(np.mean(x * x))
    if ms == 0 or np.ptp(x) == 0:
        raise DegenerateInputError("GGD fit on zero-variance samples")
    rho = float(np.mean(np.abs(x))) ** 2 / ms
    return GgdParams(alpha=_match_shape(rho), sigma=float(np.sqrt(ms)))


def fit_aggd(samples) -> AggdParams:
    """Moment-matching AGGD fit with the left/right spread correction."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < MIN_FIT_SAMPLES:
        raise DegenerateInputError(f"AGGD fit needs >= {MIN_FIT_SAMPLES} samples, got {x.size}")
    neg = x[x < 0]
    pos = x[x > 0]
    if neg.size == 0 or pos.size == 0:
        raise DegenerateInputError("AGGD fit needs samples of both signs")
    sigma_l = float(np.sqrt(np.mean(neg * neg)))
    sigma_r = float(np.sqrt(np.mean(pos * pos)))
    g = sigma_l / sigma_r
    r_hat = float(np.mean(np.abs(x))) ** 2 / float(np.mean(x * x))
    r_norm = r_hat * (g**3 + 1) * (g + 1) / (g**2 + 1) ** 2
    nu = _match_shape(r_norm)
    width = np.sqrt(np.exp(gammaln(1 / nu) - gammaln(3 / nu)))
    eta = (sigma_r - sigma_l) * width * np.exp(gammaln(2 / nu) - gammaln(1 / nu))
    return AggdParams(eta=float(eta), nu=nu, sigma_l=sigma_l, sigma_r=sigma_r)


def _scale_features(q, c):
    try:
        m = mscn(q, c)
    except DimensionError as exc:
        raise FrameFeatureError("mscn", exc) from exc
    try:
        ggd = fit_ggd(m)
    except DegenerateInputError as exc:
        raise FrameFeatureError("ggd", exc) from exc
    out = [ggd.alpha, ggd.sigma]
    for name, prod in zip(ORIENTATIONS, pairwise_products(m)):
        try:
            p = fit_aggd(prod)
        except DegenerateInputError as exc:
            raise FrameFeatureError(f"aggd[{name}]", exc) from exc
        out += [p.eta, p.nu, p.sigma_l, p.sigma_r]
    return out


def frame_features(q, c: float = MSCN_C, second_scale=None) -> np.ndarray:
    """36 NSS features of a transformed frame at full and half resolution.

    ``second_scale`` overrides the half-resolution signal; by default it is
    ``downsample2(q)``.
    """
    q = np.asarray(q, dtype=np.float64)
    q2 = downsample2(q) if second_scale is None else np.asarray(second_scale, dtype=np.float64)
    return np.array(_scale_features(q, c) + _scale_features(q2, c))


def nr_frame_features(luma: LumaFrame, cfg: TransformConfig, frame_index: int,
                      scale_mode: str = "transform_then_downsample",
                      plain: bool = False, c: float | None = None) -> np.ndarray:
    """Per-frame features of a luma frame.

    ``plain=True`` skips the transform and analyses luma rescaled to
    [0, 255] with the classic stabilizer C = 1; it exists for comparing
    sensitivities against the transformed pathway.
    """
    if plain:
        x = luma.as_float() * (255.0 / luma.peak)
        return frame_features(x, 1.0 if c is None else c)
    c = MSCN_C if c is None else c
    q = hdrmax(luma, cfg, frame_index)
    if scale_mode == "transform_then_downsample":
        return frame_features(q, c)
    if scale_mode == "downsample_then_transform":
        half = downsample2(luma)
        return frame_features(q, c, second_scale=hdrmax(half, cfg, frame_index))
    raise ValueError(f"unknown scale_mode {scale_mode!r}")


def temporal_pool(frame_feats: Sequence) -> np.ndarray:
    """Means over all frames, then stds within 5-frame groups averaged over groups.

    A trailing partial group counts toward the means but not the stds.
    """
    f = np.asarray(frame_feats, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < GROUP_SIZE:
        raise InsufficientFramesError(
            f"temporal pooling needs >= {GROUP_SIZE} frames, got {len(f)}"
        )
    n_groups = f.shape[0] // GROUP_SIZE
    groups = f[: n_groups * GROUP_SIZE].reshape(n_groups, GROUP_SIZE, f.shape[1])
    return np.concatenate([f.mean(axis=0), groups.std(axis=1).mean(axis=0)])


def video_features(frames: Sequence[LumaFrame], cfg: TransformConfig, **kwargs) -> np.ndarray:
    """72-dimensional NR feature vector of a sequence of luma frames."""
    return temporal_pool([nr_frame_features(fr, cfg, i, **kwargs) for i, fr in enumerate(frames)])
