"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
report.  Criterion 7 is the end-to-end toy experiment and takes the bulk
of the runtime (a 2,000-step training run plus dense and coarse-to-fine
outpainting of 16 held-out videos on one CPU).
"""

import math
import time

import numpy as np
import pytest

from vidpaint import tensor as tc
from vidpaint.corpus import gen_corpus, read_corpus, write_corpus
from vidpaint.guidance import GuidanceConfig, border_fill, guided_epsilon
from vidpaint.masks import (MaskStrategy, STRATEGY_WEIGHTS, assemble_conditioning,
                            make_rect_mask, sample_guide_case, sample_mask,
                            validate_conditioning)
from vidpaint.metrics import evaluate, mse, psnr_from_mse, ssim
from vidpaint.net import config_header
from vidpaint.planner import (chain_depth, execute_plan, plan_dense, plan_hybrid,
                              plan_infill_only, validate_plan)
from vidpaint.schedule import build_schedule, forward_sample, reverse_step
from vidpaint.training import TrainConfig, train

from test_cli import rerun_identical
from test_tensor import GRADCHECK_OPS, _instances


def _report(num, name, passed, detail=""):
    print(f"\n[acceptance {num}] {name}: {'PASS' if passed else 'FAIL'}  {detail}")
    assert passed, f"criterion {num} ({name}): {detail}"


def test_criterion_1_autodiff_finite_differences():
    t0 = time.perf_counter()
    worst = 0.0
    for op_name, make in sorted(GRADCHECK_OPS.items()):
        for rng in _instances(op_name):
            fn, inputs = make(rng)
            worst = max(worst, tc.gradcheck(fn, inputs))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and elapsed < 60.0
    _report(1, "autodiff gradients",
            ok, f"max rel err {worst:.2e} over {len(GRADCHECK_OPS)} op kinds x20, "
                f"{elapsed:.1f}s")


def test_criterion_2_schedule():
    s = build_schedule()
    prod = 1.0
    for beta in s.betas:
        prod *= 1.0 - float(beta)
    ok = (float(s.betas[0]) == 0.00085
          and float(s.betas[-1]) == 0.012
          and bool(np.all(np.diff(s.alpha_bars) < 0))
          and abs(float(s.alpha_bars[-1]) - prod) <= 1e-9 * abs(prod))
    _report(2, "noise schedule", ok,
            f"beta_1={float(s.betas[0])!r} beta_T={float(s.betas[-1])!r} "
            f"abar_T={float(s.alpha_bars[-1]):.3e} oracle gap "
            f"{abs(float(s.alpha_bars[-1]) - prod):.1e}")


def test_criterion_3_forward_inverse_identity():
    s = build_schedule()
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        x0 = rng.random((4, 6)).astype(np.float32)
        eps = rng.standard_normal((4, 6)).astype(np.float32)
        t = int(rng.integers(1, s.steps + 1))
        xt = forward_sample(x0, t, eps, s)
        back = reverse_step(xt, eps, t, 0, s)
        worst = max(worst, float(np.abs(back - x0).max()))
    _report(3, "forward/inverse identity", worst <= 1e-5,
            f"max abs err {worst:.2e} over 100 random (x0, t)")


def test_criterion_4_guidance_algebra():
    rng = np.random.default_rng(1)
    ok = True
    for _ in range(50):
        shape = (int(rng.integers(1, 5)), int(rng.integers(1, 4)), 8, 8)
        e_u = rng.standard_normal(shape).astype(np.float32)
        e_c = rng.standard_normal(shape).astype(np.float32)
        e_f = rng.standard_normal(shape).astype(np.float32)
        ok &= guided_epsilon(e_u, e_c, e_f, 0.0, 0.0).tobytes() == e_u.tobytes()
        ok &= guided_epsilon(e_u, e_c, e_f, 1.0, 1.0).tobytes() == e_f.tobytes()
    _report(4, "guidance algebra", ok,
            "(0,0) and (1,1) identities bit-exact on 50 random tensor triples")


def test_criterion_5_mask_statistics():
    n = 100_000
    rng = np.random.default_rng(2)
    strat_counts = {s: 0 for s in MaskStrategy}
    masks = []
    for _ in range(n):
        spec = sample_mask(rng, 16, 16)
        strat_counts[spec.strategy] += 1
        masks.append(spec.mask)
    order = [MaskStrategy.FOUR, MaskStrategy.SINGLE, MaskStrategy.BIDIR,
             MaskStrategy.RANDOM_DIRS, MaskStrategy.ALL]
    strat_gap = max(abs(strat_counts[s] / n - p)
                    for s, p in zip(order, STRATEGY_WEIGHTS))

    case_counts = {1: 0, 2: 0, 3: 0}
    guide = frames = 0
    roles_draws = []
    for _ in range(n):
        case, roles = sample_guide_case(rng, 16)
        case_counts[case] += 1
        roles_draws.append(roles)
        if case == 3:
            guide += sum(r.value == "guide" for r in roles)
            frames += len(roles)
    case_gap = max(abs(case_counts[c] / n - p)
                   for c, p in zip((1, 2, 3), (0.3, 0.35, 0.35)))
    rate_gap = abs(guide / frames - 0.5)

    leakage_ok = True
    video = rng.random((16, 1, 16, 16)).astype(np.float32)
    gf = rng.random((4, 1, 16, 16)).astype(np.float32)
    for i in range(500):
        cond = assemble_conditioning(list(video), roles_draws[i], masks[i], gf,
                                     fps=1)
        try:
            validate_conditioning(cond)
        except AssertionError:
            leakage_ok = False
    ok = strat_gap <= 0.02 and case_gap <= 0.02 and rate_gap <= 0.02 and leakage_ok
    _report(5, "mask statistics", ok,
            f"strategy gap {strat_gap:.4f}, case gap {case_gap:.4f}, "
            f"per-frame rate gap {rate_gap:.4f}, leakage holds on 500 assemblies")


def test_criterion_6_planner():
    t0 = time.perf_counter()
    hybrid = plan_hybrid(451, 16, (30, 15, 1))
    dense = plan_dense(451, 16)
    infill = plan_infill_only(451, 16, (15, 1))
    pinned = (hybrid.num_calls == 33 and chain_depth(hybrid) == 4
              and dense.num_calls == 30 and chain_depth(dense) == 30
              and infill.levels[0] == 225)
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(1000):
        frames = int(rng.integers(2, 25))
        length = int(rng.integers(frames, 2000))
        kind = rng.integers(3)
        if kind == 0:
            plan = plan_dense(length, frames)
        elif kind == 1:
            plan = plan_hybrid(length, frames, (int(rng.choice([2, 3, 5, 15])), 1))
        else:
            s2 = int(rng.choice([2, 3, 5]))
            plan = plan_hybrid(length, frames, (s2 * int(rng.choice([2, 3])), s2, 1))
        validate_plan(plan)
        checked += 1
    elapsed = time.perf_counter() - t0
    ok = pinned and checked == 1000 and elapsed < 10.0
    _report(6, "planner", ok,
            f"hybrid 33/4, dense 30/30, infill-only coarsest 225; "
            f"{checked} random instances valid in {elapsed:.1f}s")


def test_criterion_7_end_to_end(trained_model, holdout_corpus, toy_cfg):
    params, losses = trained_model
    schedule = build_schedule()
    mask = make_rect_mask(16, 16, "single", 0.5, ("left",)).mask
    hidden = ~mask
    guidance = GuidanceConfig()

    t0 = time.perf_counter()
    dense_wins = 0
    jit_dense, jit_hybrid = [], []
    for i, video in enumerate(holdout_corpus):
        truth = video.frames
        out_d, _ = execute_plan(plan_dense(32, 16), truth, mask, params, toy_cfg,
                                schedule, guidance=guidance, seed=1000 + i)
        out_h, _ = execute_plan(plan_hybrid(32, 16, (2, 1)), truth, mask, params,
                                toy_cfg, schedule, guidance=guidance,
                                seed=2000 + i)
        baseline = border_fill(truth, mask)
        if mse(out_d, truth, hidden) < mse(baseline, truth, hidden):
            dense_wins += 1
        jit_dense.append(evaluate(out_d, truth, mask).jitter_ratio)
        jit_hybrid.append(evaluate(out_h, truth, mask).jitter_ratio)
    elapsed = time.perf_counter() - t0

    win_rate = dense_wins / len(holdout_corpus)
    mean_jd = float(np.mean(jit_dense))
    mean_jh = float(np.mean(jit_hybrid))
    ok = win_rate >= 0.8 and mean_jh <= mean_jd
    _report(7, "end-to-end toy experiment", ok,
            f"model beats border replication on {win_rate * 100:.0f}% of videos; "
            f"jitter hybrid {mean_jh:.3f} vs dense {mean_jd:.3f}; "
            f"outpainting {elapsed / 60:.1f} min "
            f"(training loss {np.mean(losses[:50]):.3f} -> {np.mean(losses[-50:]):.3f})")


def test_criterion_8_cli_determinism(tmp_path):
    from test_cli import run
    corpus_dir = tmp_path / "corpus"
    a, b = rerun_identical(["gen-corpus", "--count", "4", "--length", "32",
                            "--seed", "5", "--out", str(corpus_dir)], corpus_dir)
    ok = a == b
    corpus = corpus_dir / "corpus.m3dv"
    assert run(["gen-corpus", "--count", "4", "--length", "32", "--seed", "5",
                "--out", str(corpus_dir)]) == 0

    train_dir = tmp_path / "train"
    a, b = rerun_identical(["train", "--corpus", str(corpus), "--steps", "3",
                            "--batch", "2", "--widths", "8,16", "--seed", "1",
                            "--out", str(train_dir)], train_dir)
    ok &= a == b
    assert run(["train", "--corpus", str(corpus), "--steps", "3", "--batch", "2",
                "--widths", "8,16", "--seed", "1", "--out", str(train_dir)]) == 0

    out_dir = tmp_path / "out"
    a, b = rerun_identical(["outpaint", "--checkpoint",
                            str(train_dir / "checkpoint.m3dt"), "--video",
                            str(corpus), "--mode", "ctf", "--levels", "2,1",
                            "--steps", "4", "--seed", "2", "--out",
                            str(out_dir)], out_dir)
    ok &= a == b
    assert run(["outpaint", "--checkpoint", str(train_dir / "checkpoint.m3dt"),
                "--video", str(corpus), "--mode", "ctf", "--levels", "2,1",
                "--steps", "4", "--seed", "2", "--out", str(out_dir)]) == 0

    eval_dir = tmp_path / "eval"
    a, b = rerun_identical(["eval", "--pred", str(corpus), "--truth", str(corpus),
                            "--mask", str(out_dir / "mask.pgm"),
                            "--out", str(eval_dir)], eval_dir)
    ok &= a == b
    _report(8, "CLI rerun determinism", ok,
            "gen-corpus, train, outpaint (ctf), eval all byte-identical on rerun")


def test_criterion_9_formats_and_metric_anchors(tmp_path, trained_model, toy_cfg):
    params, _ = trained_model
    ckpt = tmp_path / "model.m3dt"
    tc.save_checkpoint(ckpt, params, header=config_header(toy_cfg))
    loaded, header = tc.load_checkpoint(ckpt)
    ckpt2 = tmp_path / "model2.m3dt"
    tc.save_checkpoint(ckpt2, loaded, header=header)
    ckpt_ok = ckpt.read_bytes() == ckpt2.read_bytes()

    from vidpaint.corpus import SyntheticSpec
    videos = gen_corpus(SyntheticSpec(seed=4), 8)
    c1, c2 = tmp_path / "c1.m3dv", tmp_path / "c2.m3dv"
    write_corpus(c1, videos)
    write_corpus(c2, read_corpus(c1))
    corpus_ok = c1.read_bytes() == c2.read_bytes()

    rng = np.random.default_rng(5)
    pairs_ok = psnr_from_mse(0.01) == pytest.approx(20.0, abs=1e-12)
    for _ in range(10):
        x = rng.random((3, 1, 16, 16))
        pairs_ok &= ssim(x, x) == pytest.approx(1.0, abs=1e-12)
        y = rng.random((3, 1, 16, 16))
        m = mse(x, y)
        pairs_ok &= psnr_from_mse(m) == pytest.approx(-10 * math.log10(m))
    ok = ckpt_ok and corpus_ok and bool(pairs_ok)
    _report(9, "formats and metric anchors", ok,
            "checkpoint + corpus round-trip bit-exact; psnr(0.01)=20dB; ssim(x,x)=1")
