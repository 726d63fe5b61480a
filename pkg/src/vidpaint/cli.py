"""Command line: corpus generation, training, plan inspection, outpainting, eval.

Every run writes a manifest.json next to its outputs recording the
command, its parameters, the seed, and content hashes of binary inputs;
rerunning with the same manifest reproduces every output byte for byte
(timing logs, which are inherently unrepeatable, go to *.log.csv).
Outputs are written via temp-file + rename, so failures leave nothing
half-written.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from . import net as dn
from .corpus import (SyntheticSpec, _write_atomic, gen_corpus, read_corpus,
                     read_pgm, write_corpus, write_frames, write_pgm)
from .guidance import GuidanceConfig
from .masks import MaskStrategy, make_rect_mask
from .metrics import evaluate, metrics_csv
from .planner import (chain_depth, execute_plan, format_plan_table,
                      plan_dense, plan_hybrid, plan_infill_only, plan_depth_csv)
from .schedule import SamplerConfig, build_schedule
from .tensor import load_checkpoint, save_checkpoint
from .training import TrainConfig, loss_csv, train

__all__ = ["main"]


class CliError(Exception):
    pass


def _write_text(path, text):
    _write_atomic(path, text.encode())


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir, command, params, inputs=(), outputs=()):
    params = {k: v for k, v in params.items()
              if k not in ("fn", "command") and not callable(v)}
    manifest = {
        "tool": "vidpaint",
        "version": __version__,
        "command": command,
        "params": dict(sorted(params.items())),
        "inputs": {os.path.basename(p): _sha256(p) for p in inputs},
        "outputs": sorted(os.path.basename(p) for p in outputs),
    }
    path = os.path.join(out_dir, "manifest.json")
    _write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _require_file(path, what):
    if not os.path.isfile(path):
        raise CliError(f"{what} not found: {path}")
    return path


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen_corpus(args):
    spec = SyntheticSpec(motif=args.motif, length=args.length, height=args.size,
                         width=args.size, channels=args.channels,
                         speed=args.speed, amplitude=args.amplitude,
                         seed=args.seed)
    videos = gen_corpus(spec, args.count, fps=args.fps)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "corpus.m3dv")
    write_corpus(path, videos)
    _write_manifest(args.out, "gen-corpus", vars(args) | {"out": args.out},
                    outputs=[path])
    print(f"wrote {len(videos)} videos to {path}")
    return 0


def cmd_train(args):
    videos = read_corpus(_require_file(args.corpus, "corpus"))
    shape = videos[0].frames.shape
    cfg = dn.DenoiserConfig(frames=args.frames, size=shape[2], channels=shape[1],
                            widths=tuple(int(w) for w in args.widths.split(",")),
                            groups=args.groups)
    tcfg = TrainConfig(steps=args.steps, batch_size=args.batch, lr=args.lr,
                       warmup=args.warmup, seed=args.seed)
    schedule = build_schedule()
    report = (lambda s, l: print(f"step {s} loss {l:.4f}")) if args.verbose else None
    params, losses = train(videos, cfg, tcfg, schedule=schedule, progress=report)
    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, "checkpoint.m3dt")
    save_checkpoint(ckpt, params, header=dn.config_header(cfg))
    losses_path = os.path.join(args.out, "loss.csv")
    _write_text(losses_path, loss_csv(losses))
    _write_manifest(args.out, "train", vars(args) | {"out": args.out},
                    inputs=[args.corpus], outputs=[ckpt, losses_path])
    print(f"trained {len(losses)} steps; final loss {losses[-1]:.4f}; wrote {ckpt}")
    return 0


def _build_plan(mode, length, frames, levels):
    if mode == "dense":
        return plan_dense(length, frames)
    if mode == "hybrid":
        return plan_hybrid(length, frames, levels)
    if mode == "infill-only":
        return plan_infill_only(length, frames, levels)
    raise CliError(f"unknown plan mode {mode!r}")


def cmd_plan(args):
    levels = tuple(int(x) for x in args.levels.split(","))
    plan = _build_plan(args.mode, args.length, args.frames, levels)
    print(plan_depth_csv(plan), end="")
    print(format_plan_table(plan))
    return 0


def cmd_outpaint(args):
    params, header = load_checkpoint(_require_file(args.checkpoint, "checkpoint"))
    cfg = dn.config_from_header(header)
    videos = read_corpus(_require_file(args.video, "video file"))
    if not 0 <= args.index < len(videos):
        raise CliError(f"video index {args.index} outside 0..{len(videos) - 1}")
    video = videos[args.index]
    t_total = video.length
    want = (cfg.channels, cfg.size, cfg.size)
    if video.frames.shape[1:] != want:
        raise CliError(f"video frames {video.frames.shape[1:]} do not match "
                       f"the checkpoint's {want}")

    strategy = MaskStrategy(args.mask_strategy)
    sides = {"single": (args.direction,), "bidir": ("left", "right"),
             "four": ("left", "right", "top", "bottom")}.get(strategy.value, ())
    spec = make_rect_mask(cfg.size, cfg.size, strategy, args.ratio, sides)

    levels = tuple(int(x) for x in args.levels.split(","))
    mode = "dense" if args.mode == "dense" else "hybrid"
    plan = _build_plan(mode, t_total, cfg.frames, levels)
    schedule = build_schedule()
    sampler = SamplerConfig(num_inference_steps=args.steps, kind=args.sampler)
    guidance = GuidanceConfig(context_scale=args.s1, prompt_scale=args.s2)
    out, records = execute_plan(plan, video.frames, spec.mask, params, cfg,
                                schedule, sampler=sampler, guidance=guidance,
                                seed=args.seed, init=args.init)

    os.makedirs(args.out, exist_ok=True)
    frame_paths = write_frames(args.out, out, prefix="frame")
    mask_path = os.path.join(args.out, "mask.pgm")
    write_pgm(mask_path, spec.mask.astype(np.float64))
    rec = evaluate(out, video.frames, spec.mask, region="hidden")
    metrics_path = os.path.join(args.out, "metrics.csv")
    _write_text(metrics_path, metrics_csv([(f"video{args.index}", rec)]))
    timing_path = os.path.join(args.out, "calls.log.csv")
    rows = ["call_id,level,stride,hidden_mse,runtime_s"]
    rows += [f"{r['call_id']},{r['level']},{r['stride']},"
             f"{'' if r['hidden_mse'] is None else repr(r['hidden_mse'])},"
             f"{r['runtime_s']:.3f}" for r in records]
    _write_text(timing_path, "\n".join(rows) + "\n")
    _write_manifest(args.out, "outpaint",
                    vars(args) | {"out": args.out, "plan_calls": plan.num_calls,
                                  "plan_depth": chain_depth(plan)},
                    inputs=[args.checkpoint, args.video],
                    outputs=frame_paths + [mask_path, metrics_path])
    msg = "" if rec.mse is None else f"; hidden-region mse {rec.mse:.5f}"
    print(f"outpainted {t_total} frames with {plan.num_calls} calls{msg}")
    return 0


def cmd_eval(args):
    pred = read_corpus(_require_file(args.pred, "prediction file"))
    truth = read_corpus(_require_file(args.truth, "ground-truth file"))
    if len(pred) != len(truth):
        raise CliError(f"{len(pred)} predictions vs {len(truth)} ground-truth videos")
    mask = read_pgm(_require_file(args.mask, "mask PGM")) > 0.5
    rows = []
    for i, (p, t) in enumerate(zip(pred, truth)):
        if p.frames.shape != t.frames.shape:
            raise CliError(f"video {i}: shape {p.frames.shape} vs {t.frames.shape}")
        rows.append((f"video{i}", evaluate(p.frames, t.frames, mask,
                                           region=args.region)))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "metrics.csv")
    _write_text(path, metrics_csv(rows))
    _write_manifest(args.out, "eval", vars(args) | {"out": args.out},
                    inputs=[args.pred, args.truth, args.mask], outputs=[path])
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="vidpaint",
                                description="masked video outpainting, desk scale")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-corpus", help="write a synthetic video corpus")
    g.add_argument("--motif", default="moving-square",
                   choices=["moving-square", "moving-gradient", "panning-texture"])
    g.add_argument("--count", type=int, default=64)
    g.add_argument("--length", type=int, default=32)
    g.add_argument("--size", type=int, default=16)
    g.add_argument("--channels", type=int, default=1)
    g.add_argument("--speed", type=float, default=1.0)
    g.add_argument("--amplitude", type=float, default=0.8)
    g.add_argument("--fps", type=int, default=8)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen_corpus)

    t = sub.add_parser("train", help="train the denoiser on a corpus")
    t.add_argument("--corpus", required=True)
    t.add_argument("--steps", type=int, default=2000)
    t.add_argument("--batch", type=int, default=8)
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--warmup", type=int, default=1000)
    t.add_argument("--frames", type=int, default=16)
    t.add_argument("--widths", default="16,32")
    t.add_argument("--groups", type=int, default=8)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--verbose", action="store_true")
    t.add_argument("--out", required=True)
    t.set_defaults(fn=cmd_train)

    pl = sub.add_parser("plan", help="print a coarse-to-fine plan")
    pl.add_argument("--length", type=int, required=True)
    pl.add_argument("--frames", type=int, default=16)
    pl.add_argument("--levels", default="30,15,1")
    pl.add_argument("--mode", default="hybrid",
                    choices=["hybrid", "dense", "infill-only"])
    pl.set_defaults(fn=cmd_plan)

    o = sub.add_parser("outpaint", help="complete the hidden edges of a video")
    o.add_argument("--checkpoint", required=True)
    o.add_argument("--video", required=True, help="corpus file holding the input")
    o.add_argument("--index", type=int, default=0)
    o.add_argument("--mask-strategy", default="single",
                   choices=["four", "single", "bidir", "all"])
    o.add_argument("--ratio", type=float, default=0.5)
    o.add_argument("--direction", default="left",
                   choices=["left", "right", "top", "bottom"])
    o.add_argument("--mode", default="dense", choices=["dense", "ctf"])
    o.add_argument("--levels", default="30,15,1")
    o.add_argument("--s1", type=float, default=2.0)
    o.add_argument("--s2", type=float, default=4.0)
    o.add_argument("--init", default="pure", choices=["pure", "warm"])
    o.add_argument("--steps", type=int, default=50)
    o.add_argument("--sampler", default="ddim", choices=["ddim", "plms"])
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", required=True)
    o.set_defaults(fn=cmd_outpaint)

    e = sub.add_parser("eval", help="metrics for predictions vs ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--mask", required=True, help="PGM of the visible region")
    e.add_argument("--region", default="hidden", choices=["hidden", "full"])
    e.add_argument("--out", required=True)
    e.set_defaults(fn=cmd_eval)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
