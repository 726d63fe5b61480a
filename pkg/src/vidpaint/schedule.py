"""Noise schedule, forward corruption, and deterministic reverse samplers.

The schedule tables are float64; per-step coefficients are handed to the
float32 sample arrays as python floats so the arrays keep their dtype.
Step indices are 1-based (step t uses the t-th table entry); t = 0 means
"fully denoised" and has accumulated product 1 by convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NoiseSchedule", "SamplerConfig", "build_schedule", "forward_sample",
    "training_target", "reverse_step", "select_timesteps", "sample_chain",
    "schedule_csv",
]


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step noise rates and their running products.

    betas[i] and alpha_bars[i] belong to step i+1; alpha_bar(0) == 1.
    """

    kind: str
    beta_start: float
    beta_end: float
    betas: np.ndarray        # (T,) float64
    alpha_bars: np.ndarray   # (T,) float64

    @property
    def steps(self):
        return len(self.betas)

    def alpha_bar(self, t):
        if not 0 <= t <= self.steps:
            raise ValueError(f"step {t} outside [0, {self.steps}]")
        if t == 0:
            return 1.0
        return float(self.alpha_bars[t - 1])


@dataclass(frozen=True)
class SamplerConfig:
    """Reverse-process settings: step count, update rule, and whether the
    per-step signal estimate is clamped to the unit data range.

    Clamping keeps weak models' trajectories on-distribution (video data
    here lives in [0, 1]); clip_x0=False gives the pure update, which is
    what the closed-form chain identities assume.
    """

    num_inference_steps: int = 50
    kind: str = "ddim"  # "ddim" | "plms"
    clip_x0: bool = True

    def __post_init__(self):
        if self.kind not in ("ddim", "plms"):
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        if self.num_inference_steps < 1:
            raise ValueError("num_inference_steps must be >= 1")


def build_schedule(kind="scaled-linear", steps=1000, beta_start=0.00085, beta_end=0.012):
    """Construct the noise-rate table.

    Scaled-linear interpolates sqrt(beta) linearly between the endpoints
    and squares, so the first and last rates equal the endpoints exactly.
    """
    if kind != "scaled-linear":
        raise ValueError(f"unknown schedule kind {kind!r}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    if steps == 1:
        betas = np.array([beta_start], dtype=np.float64)
    else:
        betas = np.linspace(math.sqrt(beta_start), math.sqrt(beta_end), steps) ** 2
    alpha_bars = np.cumprod(1.0 - betas)
    return NoiseSchedule(kind=kind, beta_start=beta_start, beta_end=beta_end,
                         betas=betas, alpha_bars=alpha_bars)


def forward_sample(x0, t, noise, schedule):
    """Corrupt x0 to step t: sqrt(abar_t) * x0 + sqrt(1 - abar_t) * noise."""
    x0 = np.asarray(x0)
    noise = np.asarray(noise)
    if x0.shape != noise.shape:
        raise ValueError(f"forward_sample: shape mismatch {x0.shape} vs {noise.shape}")
    if not 1 <= t <= schedule.steps:
        raise ValueError(f"forward_sample: step {t} outside [1, {schedule.steps}]")
    ab = schedule.alpha_bar(t)
    return float(math.sqrt(ab)) * x0 + float(math.sqrt(1.0 - ab)) * noise


def training_target(x0, t, noise, schedule):
    """Model input / regression target pair for the noise-prediction loss."""
    return forward_sample(x0, t, noise, schedule), noise


def _transition(x_t, eps, t, t_next, schedule, clip_x0=False):
    # Deterministic update: reconstruct x0 from the noise estimate, then
    # re-corrupt to the target step.  Algebraically this is also the
    # pseudo-numerical first-order transition.
    ab_t = schedule.alpha_bar(t)
    ab_n = schedule.alpha_bar(t_next)
    x0_hat = (x_t - float(math.sqrt(1.0 - ab_t)) * eps) / float(math.sqrt(ab_t))
    if clip_x0:
        x0_hat = np.clip(x0_hat, 0.0, 1.0)
    return float(math.sqrt(ab_n)) * x0_hat + float(math.sqrt(1.0 - ab_n)) * eps


def reverse_step(x_t, eps, t, t_next, schedule, kind="ddim", history=None,
                 clip_x0=False):
    """One reverse update from step t to t_next (t > t_next >= 0).

    "ddim" uses the noise estimate as-is.  "plms" combines it with the
    three most recent stored estimates (4th-order linear multistep); it
    rejects calls until that history has been warmed up.
    """
    if t_next >= t:
        raise ValueError(f"reverse_step: target step {t_next} must be below {t}")
    if kind == "ddim":
        return _transition(x_t, eps, t, t_next, schedule, clip_x0)
    if kind == "plms":
        if history is None or len(history) < 3:
            have = 0 if history is None else len(history)
            raise ValueError(f"plms needs 3 stored estimates, have {have}; warm up first")
        e = (55.0 * eps - 59.0 * history[-1] + 37.0 * history[-2] - 9.0 * history[-3]) / 24.0
        return _transition(x_t, e, t, t_next, schedule, clip_x0)
    raise ValueError(f"unknown reverse kind {kind!r}")


def select_timesteps(total, count):
    """Descending subsequence of 1..total: `count` evenly spaced steps, floored."""
    if count < 1 or count > total:
        raise ValueError(f"cannot pick {count} steps from 1..{total}")
    if count == 1:
        return np.array([total], dtype=np.int64)
    ts = np.floor(np.linspace(1, total, count)).astype(np.int64)
    return ts[::-1].copy()


def _rk_warmup_step(z, eps_fn, t, t_next, schedule, history, clip_x0):
    # Pseudo Runge-Kutta: four model calls across the interval; only the
    # first estimate enters the multistep history.
    t_mid = t - (t - t_next) // 2
    e1 = eps_fn(z, t)
    history.append(e1)
    z1 = _transition(z, e1, t, t_mid, schedule, clip_x0)
    e2 = eps_fn(z1, t_mid)
    z2 = _transition(z, e2, t, t_mid, schedule, clip_x0)
    e3 = eps_fn(z2, t_mid)
    z3 = _transition(z, e3, t, t_next, schedule, clip_x0)
    e4 = eps_fn(z3, t_next)
    e = (e1 + 2.0 * e2 + 2.0 * e3 + e4) / 6.0
    return _transition(z, e, t, t_next, schedule, clip_x0)


def sample_chain(z, eps_fn, schedule, config=SamplerConfig()):
    """Run the full reverse chain from z (at the largest selected step) to 0.

    eps_fn(z, t) -> noise estimate at step t.  Returns the step-0 sample.
    """
    ts = select_timesteps(schedule.steps, config.num_inference_steps)
    targets = list(ts[1:]) + [0]
    clip = config.clip_x0
    if config.kind == "ddim":
        for t, t_next in zip(ts, targets):
            z = _transition(z, eps_fn(z, int(t)), int(t), int(t_next), schedule,
                            clip)
        return z
    history = []
    for t, t_next in zip(ts, targets):
        t, t_next = int(t), int(t_next)
        if len(history) < 3:
            z = _rk_warmup_step(z, eps_fn, t, t_next, schedule, history, clip)
        else:
            e = eps_fn(z, t)
            z = reverse_step(z, e, t, t_next, schedule, kind="plms",
                             history=history, clip_x0=clip)
            history.append(e)
            del history[:-3]
    return z


def schedule_csv(schedule):
    """Audit dump: one row per step with t, beta, alpha_bar."""
    lines = ["t,beta,alpha_bar"]
    for i in range(schedule.steps):
        lines.append(f"{i + 1},{float(schedule.betas[i])!r},{float(schedule.alpha_bars[i])!r}")
    return "\n".join(lines) + "\n"
