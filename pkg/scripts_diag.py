"""Diagnose sampling quality across guidance scales. Not part of the package."""
import sys

import numpy as np

sys.path.insert(0, "src")
sys.path.insert(0, "tests")

from conftest import toy_spec, HOLDOUT_SEED
from vidpaint import gen_corpus
from vidpaint.guidance import GuidanceConfig, border_fill
from vidpaint.masks import make_rect_mask
from vidpaint.metrics import evaluate, mse
from vidpaint.net import config_from_header
from vidpaint.planner import execute_plan, plan_dense
from vidpaint.schedule import SamplerConfig, build_schedule
from vidpaint.tensor import load_checkpoint

params0, header = load_checkpoint("/tmp/calib_ckpt.m3dt")
from vidpaint.tensor import ParamStore
params = ParamStore()
for name, t in params0.items():
    params.add(name.replace("mid1.", "mid."), t.data)
cfg = config_from_header(header)
holdout = gen_corpus(toy_spec(HOLDOUT_SEED), 4)
schedule = build_schedule()
mask = make_rect_mask(16, 16, "single", 0.5, ("left",)).mask
hidden = ~mask

base_mses = [mse(border_fill(v.frames, mask), v.frames, hidden) for v in holdout]
print("baseline mses:", [f"{m:.4f}" for m in base_mses])

for s1, s2 in ((2.0, 4.0), (1.5, 1.5), (1.0, 1.0), (1.0, 0.0), (0.0, 0.0)):
    for init in ("pure", "warm"):
        mses, jits = [], []
        for i, v in enumerate(holdout):
            out, _ = execute_plan(plan_dense(32, 16), v.frames, mask, params, cfg,
                                  schedule, sampler=SamplerConfig(50, "ddim"),
                                  guidance=GuidanceConfig(s1, s2), seed=1000 + i,
                                  init=init)
            mses.append(mse(out, v.frames, hidden))
            jits.append(evaluate(out, v.frames, mask).jitter_ratio)
        wins = sum(m < b for m, b in zip(mses, base_mses))
        print(f"s1={s1} s2={s2} init={init}: mse {np.mean(mses):.4f} "
              f"jitter {np.mean(jits):.2f} wins {wins}/4", flush=True)
