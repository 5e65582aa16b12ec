"""Full-reference features: VIF and DLM on transformed luma, plus PSNR/SSIM/MS-SSIM factors."""

from __future__ import annotations

from dataclasses import astuple, dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .dlm import dlm
from .errors import ConfigError, DegenerateInputError, DimensionError
from .framio import LumaFrame, downsample2
from .nss import gaussian_window
from .transform import TransformConfig, hdrmax

VIF_SIGMA_NSQ = 2.0
VIF_EPS = 1e-10
VIF_MIN_SIZE = 17
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
MSSSIM_SCALES = 5
MSSSIM_MIN_SIZE = SSIM_WINDOW * 2 ** (MSSSIM_SCALES - 1)
PSNR_CAP = 100.0
REMAP_RANGE = 255.0

CLASSICAL_GROUPS = {
    "psnr": ("psnr",),
    "ssim": ("ssim_l", "ssim_c", "ssim_s"),
    "msssim": tuple(f"msssim_{k:02d}" for k in range(11)),
    "hdrmax": ("frh_vif1", "frh_vif2", "frh_vif3", "frh_vif4", "frh_dlm"),
}
FEATURE_GROUP_ORDER = ("psnr", "ssim", "msssim", "hdrmax")


@dataclass(frozen=True)
class FrHdrmaxFeatures:
    vif_scale_1: float
    vif_scale_2: float
    vif_scale_3: float
    vif_scale_4: float
    dlm: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self))


@dataclass(frozen=True)
class ClassicalFrFeatures:
    psnr: float
    ssim_l: float
    ssim_c: float
    ssim_s: float
    msssim: tuple


def _pair(ref, dist):
    ref = np.asarray(ref, dtype=np.float64)
    dist = np.asarray(dist, dtype=np.float64)
    if ref.shape != dist.shape:
        raise DimensionError(f"shape mismatch {ref.shape} vs {dist.shape}")
    return ref, dist


def _blur(x, taps, valid):
    y = ndimage.correlate1d(x, taps, axis=0, mode="reflect")
    y = ndimage.correlate1d(y, taps, axis=1, mode="reflect")
    if valid:
        r = len(taps) // 2
        y = y[r:y.shape[0] - r, r:y.shape[1] - r]
    return y


def _local_moments(x, y, taps, valid):
    mx, my = _blur(x, taps, valid), _blur(y, taps, valid)
    vx = np.maximum(_blur(x * x, taps, valid) - mx * mx, 0.0)
    vy = np.maximum(_blur(y * y, taps, valid) - my * my, 0.0)
    cxy = _blur(x * y, taps, valid) - mx * my
    return mx, my, vx, vy, cxy


def vif_scales(ref, dist) -> np.ndarray:
    """Pixel-domain VIF at four dyadic scales (windows 17, 9, 5, 3)."""
    ref, dist = _pair(ref, dist)
    if min(ref.shape) < VIF_MIN_SIZE:
        raise DimensionError(f"VIF needs at least {VIF_MIN_SIZE}x{VIF_MIN_SIZE}")
    out = []
    for k in range(1, 5):
        if k > 1:
            ref, dist = downsample2(ref), downsample2(dist)
        side = 2 ** (5 - k) + 1
        _, _, var_r, var_d, cov = _local_moments(ref, dist, gaussian_window(side, side / 5), False)
        g = cov / (var_r + VIF_EPS)
        sv2 = var_d - g * cov
        neg = g < 0
        sv2 = np.where(neg, var_d, sv2)
        g = np.where(neg, 0.0, g)
        sv2 = np.maximum(sv2, 0.0)
        num = np.sum(np.log2(1 + g * g * var_r / (sv2 + VIF_SIGMA_NSQ)))
        den = np.sum(np.log2(1 + var_r / VIF_SIGMA_NSQ))
        if den == 0:
            raise DegenerateInputError(f"VIF scale {k}: reference has no local variance")
        out.append(num / den)
    return np.array(out)


def _ssim_maps(ref, dist, peak):
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    c3 = c2 / 2
    mx, my, vx, vy, cxy = _local_moments(ref, dist, gaussian_window(SSIM_WINDOW, SSIM_SIGMA), True)
    sx, sy = np.sqrt(vx), np.sqrt(vy)
    lum = (2 * mx * my + c1) / (mx * mx + my * my + c1)
    con = (2 * sx * sy + c2) / (vx + vy + c2)
    struct = (cxy + c3) / (sx * sy + c3)
    return lum, con, struct


def ssim_factors(ref, dist, peak: float = 255.0) -> tuple[float, float, float]:
    """Spatial means of the luminance, contrast and structure SSIM terms."""
    ref, dist = _pair(ref, dist)
    if min(ref.shape) < SSIM_WINDOW:
        raise DimensionError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    return tuple(float(m.mean()) for m in _ssim_maps(ref, dist, peak))


def msssim_features(ref, dist, peak: float = 255.0) -> np.ndarray:
    """[c1, s1, c2, s2, c3, s3, c4, s4, l5, c5, s5] over a 5-level box pyramid."""
    ref, dist = _pair(ref, dist)
    if min(ref.shape) < MSSSIM_MIN_SIZE:
        raise DimensionError(f"MS-SSIM needs at least {MSSSIM_MIN_SIZE}x{MSSSIM_MIN_SIZE}")
    out = []
    for scale in range(1, MSSSIM_SCALES + 1):
        if scale > 1:
            ref, dist = downsample2(ref), downsample2(dist)
        lum, con, struct = _ssim_maps(ref, dist, peak)
        if scale == MSSSIM_SCALES:
            out.append(lum.mean())
        out += [con.mean(), struct.mean()]
    return np.array(out)


def psnr(ref, dist, peak: float = 255.0) -> float:
    ref, dist = _pair(ref, dist)
    mse = float(np.mean((ref - dist) ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10 * np.log10(peak**2 / mse))


def classical_frame_features(ref: LumaFrame, dist: LumaFrame) -> ClassicalFrFeatures:
    _check_frames(ref, dist)
    r, d, peak = ref.as_float(), dist.as_float(), ref.peak
    l, c, s = ssim_factors(r, d, peak)
    return ClassicalFrFeatures(psnr(r, d, peak), l, c, s, tuple(msssim_features(r, d, peak)))


def _check_frames(ref: LumaFrame, dist: LumaFrame):
    if (ref.width, ref.height, ref.bit_depth) != (dist.width, dist.height, dist.bit_depth):
        raise DimensionError("reference and distorted frames differ in shape or bit depth")


def remap_transformed(p, cfg: TransformConfig) -> np.ndarray:
    """Affinely map the nonlinearity's range onto [0, 255]."""
    peak = cfg.peak
    return (np.asarray(p) + peak) * (REMAP_RANGE / (2 * peak))


def fr_frame_hdrmax(ref: LumaFrame, dist: LumaFrame, cfg: TransformConfig,
                    transform: bool = True) -> np.ndarray:
    """[vif1..vif4, dlm] of one frame pair.

    ``transform=False`` runs the same metrics on luma rescaled to [0, 255].
    """
    _check_frames(ref, dist)
    if transform:
        r = remap_transformed(hdrmax(ref, cfg), cfg)
        d = remap_transformed(hdrmax(dist, cfg), cfg)
    else:
        r = ref.as_float() * (REMAP_RANGE / ref.peak)
        d = dist.as_float() * (REMAP_RANGE / dist.peak)
    return np.append(vif_scales(r, d), dlm(r, d))


def _running_mean(rows):
    # incremental form: a run of identical rows reproduces the row bit-exactly
    mean = None
    for k, row in enumerate(rows, start=1):
        mean = row.astype(np.float64) if mean is None else mean + (row - mean) / k
    return mean


def _check_videos(ref_video, dist_video):
    if len(ref_video) != len(dist_video):
        raise DimensionError(
            f"frame-count mismatch: {len(ref_video)} reference vs {len(dist_video)} distorted"
        )
    if not ref_video:
        raise DimensionError("empty video")


def fr_hdrmax(ref_video: Sequence[LumaFrame], dist_video: Sequence[LumaFrame],
              cfg: TransformConfig, transform: bool = True) -> FrHdrmaxFeatures:
    """Frame-averaged VIF (4 scales) and DLM on noise-free transformed luma."""
    if cfg.noise_enabled and transform:
        raise ConfigError("FR features are computed without the noise stage; set noise_enabled=False")
    _check_videos(ref_video, dist_video)
    mean = _running_mean(fr_frame_hdrmax(r, d, cfg, transform) for r, d in zip(ref_video, dist_video))
    return FrHdrmaxFeatures(*mean)


def classical_fr(ref_video: Sequence[LumaFrame], dist_video: Sequence[LumaFrame]) -> ClassicalFrFeatures:
    """Frame-averaged PSNR, SSIM factors and MS-SSIM features on raw luma."""
    _check_videos(ref_video, dist_video)
    acc = _running_mean(
        np.array([f.psnr, f.ssim_l, f.ssim_c, f.ssim_s, *f.msssim])
        for f in (classical_frame_features(r, d) for r, d in zip(ref_video, dist_video))
    )
    return ClassicalFrFeatures(acc[0], acc[1], acc[2], acc[3], tuple(acc[4:]))


def _classical_row(ref: LumaFrame, dist: LumaFrame, groups) -> np.ndarray:
    _check_frames(ref, dist)
    x, y, peak = ref.as_float(), dist.as_float(), ref.peak
    out = []
    if "psnr" in groups:
        out.append(psnr(x, y, peak))
    if "ssim" in groups:
        out.extend(ssim_factors(x, y, peak))
    if "msssim" in groups:
        out.extend(msssim_features(x, y, peak))
    return np.array(out)


def fr_feature_row(ref_video, dist_video, cfg: TransformConfig,
                   groups: Sequence[str] = FEATURE_GROUP_ORDER) -> dict:
    """Column name -> value for the requested feature groups, in canonical order."""
    unknown = set(groups) - set(CLASSICAL_GROUPS)
    if unknown:
        raise ConfigError(f"unknown FR feature groups: {sorted(unknown)}")
    _check_videos(ref_video, dist_video)
    values = {}
    classical = [g for g in ("psnr", "ssim", "msssim") if g in groups]
    if classical:
        acc = iter(_running_mean(_classical_row(r, d, classical) for r, d in zip(ref_video, dist_video)))
        for g in classical:
            values[g] = tuple(next(acc) for _ in CLASSICAL_GROUPS[g])
    if "hdrmax" in groups:
        values["hdrmax"] = tuple(fr_hdrmax(ref_video, dist_video, cfg).as_array())
    row = {}
    for g in FEATURE_GROUP_ORDER:
        if g in groups:
            row.update(zip(CLASSICAL_GROUPS[g], (float(v) for v in values[g])))
    return row
