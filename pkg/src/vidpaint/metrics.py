"""Reconstruction quality metrics over unit-range videos.

MSE and PSNR can be restricted to the hidden region; SSIM uses an 11x11
uniform window over valid positions, per frame and channel, averaged.
The jitter ratio compares hidden-region frame-to-frame MSE of an output
against the same statistic of the ground truth, as the temporal
consistency score of this artifact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["MetricsRecord", "mse", "psnr_from_mse", "ssim", "frame_ssim",
           "jitter_ratio", "evaluate", "metrics_csv"]

SSIM_WINDOW = 11
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricsRecord:
    """region applies to mse/psnr; ssim is always full-frame; jitter is
    always hidden-region.  None marks an undefined (absent) value."""

    mse: float | None
    psnr: float | None
    ssim: float
    jitter_ratio: float | None
    region: str  # "hidden" | "full"


def mse(a, b, region_mask=None):
    """Mean squared error, optionally over the pixels where region_mask is True."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"mse: shape mismatch {a.shape} vs {b.shape}")
    d = (a - b) ** 2
    if region_mask is None:
        return float(d.mean())
    if not region_mask.any():
        raise ValueError("mse: empty region")
    return float(d[..., region_mask].mean())


def psnr_from_mse(m):
    """-10*log10(mse) for unit dynamic range; infinite when mse is 0."""
    if m < 0:
        raise ValueError(f"negative mse {m}")
    if m == 0:
        return math.inf
    return -10.0 * math.log10(m)


def frame_ssim(a, b):
    """SSIM between two (H, W) images in [0, 1], uniform 11x11 window."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError(f"frame_ssim wants matching (H, W), got {a.shape}, {b.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"frames smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    win = (SSIM_WINDOW, SSIM_WINDOW)
    mu_a = _win_mean(a, win)
    mu_b = _win_mean(b, win)
    aa = _win_mean(a * a, win) - mu_a * mu_a
    bb = _win_mean(b * b, win) - mu_b * mu_b
    ab = _win_mean(a * b, win) - mu_a * mu_b
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * ab + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (aa + bb + c2)
    return float((num / den).mean())


def _win_mean(x, win):
    v = np.lib.stride_tricks.sliding_window_view(x, win)
    return v.mean(axis=(-2, -1))


def ssim(a, b):
    """Mean SSIM over all frames and channels of (T, C, H, W) videos."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 4:
        raise ValueError(f"ssim wants matching (T, C, H, W), got {a.shape}, {b.shape}")
    vals = [frame_ssim(a[t, c], b[t, c])
            for t in range(a.shape[0]) for c in range(a.shape[1])]
    return float(np.mean(vals))


def _adjacent_mse(frames, hidden):
    frames = np.asarray(frames, dtype=np.float64)
    d = (frames[1:] - frames[:-1]) ** 2
    return float(d[..., hidden].mean())


def jitter_ratio(pred, truth, hidden):
    """Hidden-region adjacent-frame MSE of pred over that of truth.

    Identical statistics give 1.0 by convention (0/0); a static truth
    under a jittering output gives inf.  Undefined (None) without at
    least two frames or any hidden pixel.
    """
    if not hidden.any() or len(pred) < 2:
        return None
    jp = _adjacent_mse(pred, hidden)
    jt = _adjacent_mse(truth, hidden)
    if jp == jt:
        return 1.0
    if jt == 0.0:
        return math.inf
    return jp / jt


def evaluate(pred, truth, visible_mask, region="hidden"):
    """MetricsRecord for a predicted video against its ground truth.

    visible_mask: (H, W) bool.  With region="hidden" the mse/psnr cover
    only hidden pixels and are absent when nothing is hidden.
    """
    if region not in ("hidden", "full"):
        raise ValueError(f"unknown region {region!r}")
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    hidden = ~np.asarray(visible_mask, dtype=bool)
    if region == "hidden" and not hidden.any():
        m = p = None
    else:
        m = mse(pred, truth, hidden if region == "hidden" else None)
        p = psnr_from_mse(m)
    return MetricsRecord(mse=m, psnr=p, ssim=ssim(pred, truth),
                         jitter_ratio=jitter_ratio(pred, truth, hidden),
                         region=region)


def metrics_csv(rows):
    """CSV with a fixed header; rows are (label, MetricsRecord) pairs."""
    def fmt(x):
        return "" if x is None else repr(float(x))

    lines = ["label,region,mse,psnr,ssim,jitter_ratio"]
    for label, r in rows:
        lines.append(f"{label},{r.region},{fmt(r.mse)},{fmt(r.psnr)},"
                     f"{fmt(r.ssim)},{fmt(r.jitter_ratio)}")
    return "\n".join(lines) + "\n"
