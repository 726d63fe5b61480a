"""Noise-prediction training over a synthetic corpus.

Each step draws a batch of clips (random video, frame interval, start),
masks them with a freshly sampled strategy and guide-frame case, corrupts
them to a uniform random step, and regresses the added noise with MSE
over every element.  The mask-all strategy doubles as the null-context
condition; the prompt is additionally dropped to null at a fixed rate,
and is forced null whenever the context is null.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import net as dn
from . import tensor as tc
from .guidance import GuidanceConfig
from .masks import (FrameRole, MaskStrategy, assemble_conditioning,
                    sample_guide_case, sample_mask)
from .schedule import build_schedule, forward_sample

__all__ = ["TrainConfig", "sample_training_example", "training_step", "train",
           "loss_csv"]


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch_size: int = 8
    lr: float = 1e-4
    warmup: int = 1000
    seed: int = 0
    max_interval: int = 30  # largest frame stride a clip may be drawn with


def _is_null_context(mask_spec, roles):
    return (mask_spec.strategy is MaskStrategy.ALL
            and all(r is FrameRole.CONTEXT_ONLY for r in roles))


def sample_training_example(rng, video, cfg, schedule, train_cfg,
                            guidance=GuidanceConfig()):
    """Draw one (conditioning, step, noise target, null-prompt flag) tuple."""
    frames = video.frames
    t_total = frames.shape[0]
    f = cfg.frames
    max_stride = min(train_cfg.max_interval, max(1, (t_total - 1) // (f - 1)))
    stride = int(rng.integers(1, max_stride + 1))
    start = int(rng.integers(0, t_total - (f - 1) * stride))
    clip = frames[start:start + (f - 1) * stride + 1:stride]
    mask_spec = sample_mask(rng, cfg.size, cfg.size)
    _, roles = sample_guide_case(rng, f)
    gidx = np.round(np.linspace(0, t_total - 1, cfg.global_frames)).astype(int)
    t = int(rng.integers(1, schedule.steps + 1))
    noise = rng.standard_normal(clip.shape, dtype=np.float32)
    x_t = forward_sample(clip, t, noise, schedule)
    cond = assemble_conditioning(list(clip), roles, mask_spec.mask, frames[gidx],
                                 fps=stride, noisy=x_t)
    null_prompt = bool(rng.random() < guidance.prompt_dropout)
    if _is_null_context(mask_spec, roles):
        null_prompt = True  # unconditional examples train the fully-null branch
    return cond, t, noise, null_prompt


def training_step(rng, videos, params, cfg, schedule, train_cfg, optimizer, step,
                  guidance=GuidanceConfig()):
    """One optimizer update over a fresh batch; returns the batch loss."""
    params.zero_grads()
    conds, ts, noises, prompts = [], [], [], []
    for _ in range(train_cfg.batch_size):
        video = videos[int(rng.integers(len(videos)))]
        cond, t, noise, null_prompt = sample_training_example(
            rng, video, cfg, schedule, train_cfg, guidance)
        conds.append(cond)
        ts.append(t)
        noises.append(noise)
        prompts.append(cond.null_prompt_frames() if null_prompt
                       else cond.global_prompt)
    with tc.Tape() as tape:
        tokens = dn.encode_prompt_batch(params, cfg, np.stack(prompts))
        eps_hat = dn.predict_noise_batch(params, cfg, conds, ts, tokens)
        diff = tc.sub(eps_hat, tc.tensor(np.stack(noises)))
        loss = tc.mean_all(tc.mul(diff, diff))
    tape.backward(loss)
    params.ensure_grads()
    optimizer.step(step)
    return loss.item()


def train(videos, cfg, train_cfg, schedule=None, params=None,
          guidance=GuidanceConfig(), progress=None):
    """Train a denoiser from scratch (or continue `params`).

    Returns (params, losses) with one loss per step.  Identical seeds
    reproduce identical loss curves bit for bit.
    """
    if schedule is None:
        schedule = build_schedule()
    if not videos:
        raise ValueError("empty corpus")
    for v in videos:
        want = (cfg.channels, cfg.size, cfg.size)
        if v.frames.shape[1:] != want:
            raise ValueError(f"video shape {v.frames.shape[1:]} != config {want}")
        if v.frames.shape[0] < cfg.frames:
            raise ValueError(f"video of {v.frames.shape[0]} frames is shorter "
                             f"than a clip ({cfg.frames})")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=train_cfg.seed,
                                                       spawn_key=(0,)))
    if params is None:
        params = dn.init_denoiser(cfg, rng)
    optimizer = tc.Adam(params, lr=train_cfg.lr, warmup=train_cfg.warmup)
    losses = []
    for step in range(train_cfg.steps):
        loss = training_step(rng, videos, params, cfg, schedule, train_cfg,
                             optimizer, step, guidance)
        losses.append(loss)
        if progress is not None:
            progress(step, loss)
    return params, losses


def loss_csv(losses):
    lines = ["step,loss"]
    lines += [f"{i},{loss!r}" for i, loss in enumerate(losses)]
    return "\n".join(lines) + "\n"
