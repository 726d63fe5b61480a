"""Probe: 600-step training with FiLM conditioning + direct denoise check."""
import sys
import time

import numpy as np

sys.path.insert(0, "src")
sys.path.insert(0, "tests")

from conftest import toy_spec, TOY_SEED, HOLDOUT_SEED
from vidpaint import gen_corpus
from vidpaint.masks import FrameRole, assemble_conditioning, make_rect_mask
from vidpaint.net import DenoiserConfig, config_header, encode_prompt, predict_noise
from vidpaint.schedule import build_schedule, forward_sample
from vidpaint.tensor import save_checkpoint
from vidpaint.training import TrainConfig, train

cfg = DenoiserConfig()
corpus = gen_corpus(toy_spec(TOY_SEED), 64)
schedule = build_schedule()
t0 = time.time()
tcfg = TrainConfig(steps=600, batch_size=8, lr=2e-4, warmup=200, seed=TOY_SEED)
params, losses = train(corpus, cfg, tcfg,
                       progress=lambda s, l: print(f"step {s} loss {l:.4f}", flush=True)
                       if s % 100 == 0 else None)
print(f"first50 {np.mean(losses[:50]):.4f}  [450:500] {np.mean(losses[450:500]):.4f}  "
      f"[550:600] {np.mean(losses[550:600]):.4f}  took {(time.time()-t0)/60:.1f} min")
save_checkpoint("/tmp/probe_film.m3dt", params, header=config_header(cfg))

video = gen_corpus(toy_spec(HOLDOUT_SEED), 1)[0]
mask = make_rect_mask(16, 16, "single", 0.5, ("left",)).mask
hidden = ~mask
rng = np.random.default_rng(0)
clip = video.frames[0:16]
roles = [FrameRole.CONTEXT_ONLY] * 16
gf = video.frames[np.round(np.linspace(0, 31, 16)).astype(int)]

print("\nhidden x0_hat MSE per single denoise (cond / null / trivial):")
for t in (500, 700, 900, 1000):
    eps = rng.standard_normal(clip.shape, dtype=np.float32)
    x_t = forward_sample(clip, t, eps, schedule)
    cond = assemble_conditioning(list(clip), roles, mask, gf, fps=1, noisy=x_t)
    ab = schedule.alpha_bar(t)

    def x0_err(c, gp):
        tokens = encode_prompt(params, cfg, gp)
        eps_hat = predict_noise(params, cfg, c, t, tokens).data
        x0_hat = (x_t - np.sqrt(1 - ab) * eps_hat) / np.sqrt(ab)
        return float(np.mean((x0_hat - clip)[..., hidden] ** 2))

    # trivial linear predictor assuming unit-variance data
    triv_eps = np.sqrt(1 - ab) * x_t
    x0_triv = (x_t - np.sqrt(1 - ab) * triv_eps) / np.sqrt(ab)
    e_triv = float(np.mean((x0_triv - clip)[..., hidden] ** 2))
    print(f"  t={t:4d}  {x0_err(cond, cond.global_prompt):8.4f}  "
          f"{x0_err(cond.null_context(), cond.null_prompt_frames()):8.4f}  "
          f"{e_triv:8.4f}")

from vidpaint.guidance import GuidanceConfig, border_fill
from vidpaint.metrics import evaluate, mse
from vidpaint.planner import execute_plan, plan_dense
from vidpaint.schedule import SamplerConfig

print("\nmini eval (2 videos, dense, s1=2 s2=4):")
holdout = gen_corpus(toy_spec(HOLDOUT_SEED), 2)
for i, v in enumerate(holdout):
    out, _ = execute_plan(plan_dense(32, 16), v.frames, mask, params, cfg,
                          schedule, sampler=SamplerConfig(50, "ddim"),
                          guidance=GuidanceConfig(), seed=1000 + i)
    base = border_fill(v.frames, mask)
    print(f"  video {i}: model {mse(out, v.frames, hidden):.4f} "
          f"baseline {mse(base, v.frames, hidden):.4f} "
          f"jitter {evaluate(out, v.frames, mask).jitter_ratio:.2f}", flush=True)
