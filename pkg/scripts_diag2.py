"""Direct conditional-denoising probe across steps. Not part of the package."""
import sys

import numpy as np

sys.path.insert(0, "src")
sys.path.insert(0, "tests")

from conftest import toy_spec, HOLDOUT_SEED
from vidpaint import gen_corpus
from vidpaint.masks import FrameRole, assemble_conditioning, make_rect_mask
from vidpaint.net import config_from_header, encode_prompt, predict_noise
from vidpaint.schedule import build_schedule, forward_sample
from vidpaint.tensor import ParamStore, load_checkpoint

params0, header = load_checkpoint("/tmp/calib_ckpt.m3dt")
params = ParamStore()
for name, t in params0.items():
    params.add(name.replace("mid1.", "mid."), t.data)
cfg = config_from_header(header)
schedule = build_schedule()
video = gen_corpus(toy_spec(HOLDOUT_SEED), 1)[0]
mask = make_rect_mask(16, 16, "single", 0.5, ("left",)).mask
hidden = ~mask
rng = np.random.default_rng(0)

clip = video.frames[0:16]
roles = [FrameRole.CONTEXT_ONLY] * 16
gidx = np.round(np.linspace(0, 31, 16)).astype(int)
gf = video.frames[gidx]

print("hidden-region x0_hat MSE from one denoising step (lower = better):")
print("   t    conditional  null-context")
for t in (100, 300, 500, 700, 900, 1000):
    eps = rng.standard_normal(clip.shape, dtype=np.float32)
    x_t = forward_sample(clip, t, eps, schedule)
    cond = assemble_conditioning(list(clip), roles, mask, gf, fps=1, noisy=x_t)
    ab = schedule.alpha_bar(t)

    def x0_err(c, tokens_src):
        tokens = encode_prompt(params, cfg, tokens_src)
        eps_hat = predict_noise(params, cfg, c, t, tokens).data
        x0_hat = (x_t - np.sqrt(1 - ab) * eps_hat) / np.sqrt(ab)
        return float(np.mean((x0_hat - clip)[..., hidden] ** 2))

    err_c = x0_err(cond, cond.global_prompt)
    err_n = x0_err(cond.null_context(), cond.null_prompt_frames())
    print(f"{t:5d}   {err_c:10.4f}   {err_n:10.4f}")

print("\nvisible-region check at t=900:")
t = 900
eps = rng.standard_normal(clip.shape, dtype=np.float32)
x_t = forward_sample(clip, t, eps, schedule)
cond = assemble_conditioning(list(clip), roles, mask, gf, fps=1, noisy=x_t)
ab = schedule.alpha_bar(t)
tokens = encode_prompt(params, cfg, cond.global_prompt)
eps_hat = predict_noise(params, cfg, cond, t, tokens).data
x0_hat = (x_t - np.sqrt(1 - ab) * eps_hat) / np.sqrt(ab)
print(f"visible mse {np.mean((x0_hat - clip)[..., mask] ** 2):.4f}  "
      f"hidden mse {np.mean((x0_hat - clip)[..., hidden] ** 2):.4f}")
