"""Calibration: full criterion-7 experiment with timing. Not part of the package."""
import sys
import time

import numpy as np

sys.path.insert(0, "src")
sys.path.insert(0, "tests")

from conftest import toy_spec, TOY_SEED, HOLDOUT_SEED
from vidpaint import gen_corpus
from vidpaint.guidance import GuidanceConfig
from vidpaint.masks import make_rect_mask
from vidpaint.metrics import evaluate, mse
from vidpaint.net import DenoiserConfig, config_header
from vidpaint.planner import execute_plan, plan_dense, plan_hybrid
from vidpaint.schedule import SamplerConfig, build_schedule
from vidpaint.tensor import save_checkpoint
from vidpaint.training import TrainConfig, train
from vidpaint.guidance import border_fill

t0 = time.time()
cfg = DenoiserConfig()
train_corpus = gen_corpus(toy_spec(TOY_SEED), 64)
holdout = gen_corpus(toy_spec(HOLDOUT_SEED), 16)
schedule = build_schedule()

tcfg = TrainConfig(steps=2000, batch_size=8, lr=2e-4, warmup=200, seed=TOY_SEED)
params, losses = train(train_corpus, cfg, tcfg,
                       progress=lambda s, l: print(f"step {s} loss {l:.4f}", flush=True) if s % 100 == 0 else None)
t_train = time.time() - t0
print(f"TRAIN done in {t_train/60:.1f} min; first50 {np.mean(losses[:50]):.4f} "
      f"last50 {np.mean(losses[-50:]):.4f} [450:500] {np.mean(losses[450:500]):.4f}", flush=True)
save_checkpoint("/tmp/calib_ckpt.m3dt", params, header=config_header(cfg))

mask = make_rect_mask(16, 16, "single", 0.5, ("left",)).mask
sampler = SamplerConfig(50, "ddim")
guidance = GuidanceConfig()

t1 = time.time()
rows = []
for i, video in enumerate(holdout):
    truth = video.frames
    dense = plan_dense(32, 16)
    hybrid = plan_hybrid(32, 16, (2, 1))
    out_d, _ = execute_plan(dense, truth, mask, params, cfg, schedule,
                            sampler=sampler, guidance=guidance, seed=1000 + i)
    out_h, _ = execute_plan(hybrid, truth, mask, params, cfg, schedule,
                            sampler=sampler, guidance=guidance, seed=2000 + i)
    base = border_fill(truth, mask)
    hidden = ~mask
    mse_d = mse(out_d, truth, hidden)
    mse_h = mse(out_h, truth, hidden)
    mse_b = mse(base, truth, hidden)
    jr_d = evaluate(out_d, truth, mask).jitter_ratio
    jr_h = evaluate(out_h, truth, mask).jitter_ratio
    rows.append((mse_d, mse_h, mse_b, jr_d, jr_h))
    print(f"video {i}: mse dense {mse_d:.4f} hybrid {mse_h:.4f} baseline {mse_b:.4f} "
          f"| jitter dense {jr_d:.3f} hybrid {jr_h:.3f}", flush=True)

arr = np.array(rows)
wins = (arr[:, 0] < arr[:, 2]).mean()
print(f"EVAL done in {(time.time()-t1)/60:.1f} min")
print(f"dense beats baseline on {wins*100:.0f}% of videos")
print(f"mean jitter: dense {arr[:, 3].mean():.4f} hybrid {arr[:, 4].mean():.4f}")
print(f"hybrid jitter <= dense jitter: {arr[:, 4].mean() <= arr[:, 3].mean()}")
print(f"TOTAL {(time.time()-t0)/60:.1f} min")
