"""Two-condition classifier-free guidance and the single-clip outpainting loop.

A guided step combines three denoiser evaluations: unconditional, with
clip context only, and with context plus the global-frame prompt.  The
combination is evaluated in factored form so the degenerate scale
settings reproduce the corresponding raw estimate bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import net as dn
from . import tensor as tc
from .masks import assemble_conditioning
from .schedule import SamplerConfig, forward_sample, sample_chain

__all__ = ["GuidanceConfig", "guided_epsilon", "border_fill", "warm_start",
           "outpaint_clip"]


@dataclass(frozen=True)
class GuidanceConfig:
    """Guidance scales and the training-time prompt dropout rate."""

    context_scale: float = 2.0   # pull toward the clip-context condition
    prompt_scale: float = 4.0    # pull toward the global-prompt condition
    prompt_dropout: float = 0.1  # chance of a null prompt during training

    def __post_init__(self):
        if self.context_scale < 0 or self.prompt_scale < 0:
            raise ValueError("guidance scales must be >= 0")


def guided_epsilon(eps_uncond, eps_context, eps_full, context_scale, prompt_scale):
    """e_u + s1*(e_c - e_u) + s2*(e_f - e_c), in coefficient form.

    The factored evaluation (1-s1)*e_u + (s1-s2)*e_c + s2*e_f is the same
    polynomial but makes s1=s2=0 return e_u and s1=s2=1 return e_f exactly
    in floating point.
    """
    if eps_uncond.shape != eps_context.shape or eps_context.shape != eps_full.shape:
        raise ValueError("guided_epsilon: estimate shapes differ")
    s1 = float(context_scale)
    s2 = float(prompt_scale)
    return (1.0 - s1) * eps_uncond + (s1 - s2) * eps_context + s2 * eps_full


def border_fill(frames, mask):
    """Fill hidden pixels with the nearest visible pixel of the rectangle.

    frames: (F, C, H, W); mask: (H, W) bool, or (F, H, W) / (F, 1, H, W)
    for per-frame visibility.  A fully hidden mask falls back to a flat
    0.5 fill.
    """
    frames = np.asarray(frames, dtype=np.float32)
    mask = np.asarray(mask) > 0
    if mask.ndim == 4:
        mask = mask[:, 0]
    if mask.ndim == 3:
        return np.stack([_fill_one(frames[i], mask[i]) for i in range(len(frames))])
    return _fill_one(frames, mask)


def _fill_one(frames, mask):
    # frames: (..., H, W); one rectangle mask (H, W)
    if not mask.any():
        return np.full_like(frames, 0.5)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    h, w = mask.shape
    ri = np.clip(np.arange(h), rows[0], rows[-1])
    ci = np.clip(np.arange(w), cols[0], cols[-1])
    return frames[..., ri[:, None], ci[None, :]]


def warm_start(frames, mask, schedule, rng):
    """Noise a naive border fill all the way to the last step.

    Stand-in for preprocess-inpaint-then-corrupt initialization: the
    hidden region starts as replicated border content under full noise
    rather than as pure noise.
    """
    filled = border_fill(frames, mask)
    noise = rng.standard_normal(filled.shape, dtype=np.float32)
    return forward_sample(filled, schedule.steps, noise, schedule)


def outpaint_clip(frames, roles, mask, global_frames, fps, params, cfg, schedule,
                  sampler=SamplerConfig(), guidance=GuidanceConfig(), rng=None,
                  init="pure"):
    """Complete one clip: reverse-sample the hidden region, keep the visible.

    frames: per-slot content (sequence; None rejects), roles: FrameRole
    per slot, mask: (H, W) bool of visible pixels, global_frames:
    (g, C, H, W) raw global frames (masked internally).  Returns
    (F, C, H, W) float32 in [0, 1]; visible pixels equal their input
    exactly.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if init not in ("pure", "warm"):
        raise ValueError(f"unknown init {init!r}")
    cond = assemble_conditioning(frames, roles, mask, global_frames, fps)
    cond_null = cond.null_context()
    tokens_full = dn.encode_prompt(params, cfg, cond.global_prompt)
    tokens_null = dn.encode_prompt(params, cfg, cond.null_prompt_frames())
    # rows: unconditional, context-only, context+prompt
    tokens3 = tc.tensor(np.stack([tokens_null.data, tokens_null.data,
                                  tokens_full.data]))

    if init == "pure":
        z = rng.standard_normal(cond.noisy.shape, dtype=np.float32)
    else:
        # cond.mask already carries the all-visible override for guide slots
        z = warm_start(cond.context, cond.mask, schedule, rng)

    def eps_fn(z_t, t):
        zc = cond.with_noisy(z_t)
        e = dn.predict_noise_batch(params, cfg, [cond_null.with_noisy(z_t), zc, zc],
                                   [t, t, t], tokens3).data
        return guided_epsilon(e[0], e[1], e[2],
                              guidance.context_scale, guidance.prompt_scale)

    x0 = sample_chain(z, eps_fn, schedule, sampler)
    out = np.where(cond.mask > 0, cond.context, np.clip(x0, 0.0, 1.0))
    return out.astype(np.float32)
