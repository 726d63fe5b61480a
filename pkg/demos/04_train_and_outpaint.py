"""Miniature end-to-end run: train briefly, then outpaint one video.

Uses a small network and a short schedule so the whole script finishes
in about a minute; the full-scale experiment lives in the acceptance
suite (tests/test_acceptance.py, criterion 7) and the command line.
"""

import numpy as np

from vidpaint.corpus import SyntheticSpec, gen_corpus, write_frames
from vidpaint.guidance import border_fill
from vidpaint.masks import make_rect_mask
from vidpaint.metrics import evaluate, mse
from vidpaint.net import DenoiserConfig
from vidpaint.planner import execute_plan, plan_dense, plan_hybrid
from vidpaint.schedule import SamplerConfig, build_schedule
from vidpaint.training import TrainConfig, train

cfg = DenoiserConfig(widths=(8, 16), token_dim=16)
corpus = gen_corpus(SyntheticSpec(seed=0), 16)
holdout = gen_corpus(SyntheticSpec(seed=99), 1)

print("training a small denoiser for 60 steps (a real run uses 2000+)...")
tcfg = TrainConfig(steps=60, batch_size=4, warmup=20, seed=0)
params, losses = train(corpus, cfg, tcfg)
print(f"loss: {losses[0]:.3f} -> {losses[-1]:.3f}")

truth = holdout[0].frames
mask = make_rect_mask(16, 16, "single", 0.5, ("left",)).mask
schedule = build_schedule()
sampler = SamplerConfig(num_inference_steps=25)

print("\noutpainting the held-out video (left half hidden):")
for name, plan in (("dense", plan_dense(32, 16)),
                   ("hybrid", plan_hybrid(32, 16, (2, 1)))):
    out, records = execute_plan(plan, truth, mask, params, cfg, schedule,
                                sampler=sampler, seed=7)
    rec = evaluate(out, truth, mask)
    print(f"  {name:6s} {plan.num_calls} calls: hidden mse {rec.mse:.4f}, "
          f"jitter ratio {rec.jitter_ratio:.3f}")
    write_frames(f"outpaint_{name}", out)

baseline = border_fill(truth, mask)
print(f"  border-replication baseline: hidden mse "
      f"{mse(baseline, truth, ~mask):.4f}")
print("\nwrote outpaint_dense/ and outpaint_hybrid/ frame PGMs")
print("(a 60-step model is mostly noise; see the acceptance suite for the "
      "trained comparison)")
