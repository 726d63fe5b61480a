"""Hierarchical coarse-to-fine outpainting plans and their execution.

A plan is an ordered list of inference calls.  Each call covers a window
of frame indices at one uniform stride; indices already produced by an
earlier call enter the window as guide slots, the rest are generated.
Window starts advance by the window's own last index, so levels chain
through exactly the frames they share.  The longest dependency path
through the guide-provenance DAG is the plan's chain depth, the working
measure of artifact accumulation.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .guidance import GuidanceConfig, outpaint_clip
from .masks import FrameRole
from .schedule import SamplerConfig

__all__ = ["InferenceCall", "CtfPlan", "plan_hybrid", "plan_dense",
           "plan_infill_only", "chain_depth", "validate_plan",
           "format_plan_table", "plan_depth_csv", "execute_plan"]

FPS_RANGE = (1, 30)


@dataclass(frozen=True)
class InferenceCall:
    """One denoiser invocation inside a plan.

    indices are ascending with uniform stride; short windows (fewer than
    the clip size) occur at coarse levels and tails of short videos.
    guides maps slot position -> producing call id.
    """

    call_id: int
    level: int
    stride: int
    indices: tuple[int, ...]
    guides: tuple[tuple[int, int], ...]
    new_slots: tuple[int, ...]

    @property
    def new_indices(self):
        return tuple(self.indices[s] for s in self.new_slots)

    @property
    def guide_positions(self):
        return tuple(pos for pos, _ in self.guides)


@dataclass(frozen=True)
class CtfPlan:
    mode: str
    length: int
    frames_per_call: int
    levels: tuple[int, ...]
    calls: tuple[InferenceCall, ...]

    @property
    def num_calls(self):
        return len(self.calls)


def _check_common(length, frames):
    if frames < 2:
        raise ValueError(f"frames per call must be >= 2, got {frames}")
    if length < frames:
        raise ValueError(f"video length {length} is below the clip size {frames}")


def _check_levels(levels):
    levels = tuple(int(x) for x in levels)
    if not levels or levels[-1] != 1:
        raise ValueError(f"levels must end at interval 1, got {levels}")
    for a, b in zip(levels, levels[1:]):
        if a <= b:
            raise ValueError(f"levels must be strictly decreasing, got {levels}")
        if a % b:
            raise ValueError(f"interval {b} does not divide its parent {a}")
    return levels


def _emit_level(level_idx, stride, length, frames, produced, calls):
    """Append this level's calls; windows advance by their own last index."""
    last = ((length - 1) // stride) * stride
    grid = list(range(0, last + 1, stride))
    i = 0
    while True:
        j = min(i + frames - 1, len(grid) - 1)
        window = grid[i:j + 1]
        new = [pos for pos, idx in enumerate(window) if idx not in produced]
        if new:
            guides = tuple((pos, produced[idx]) for pos, idx in enumerate(window)
                           if idx in produced)
            call = InferenceCall(call_id=len(calls), level=level_idx, stride=stride,
                                 indices=tuple(window), guides=guides,
                                 new_slots=tuple(new))
            calls.append(call)
            for pos in new:
                produced[window[pos]] = call.call_id
        if j == len(grid) - 1:
            return
        i = j


def plan_hybrid(length, frames, levels=(30, 15, 1)):
    """Coarse-to-fine plan mixing interpolation and infilling levels."""
    _check_common(length, frames)
    levels = _check_levels(levels)
    produced: dict[int, int] = {}
    calls: list[InferenceCall] = []
    for k, stride in enumerate(levels):
        _emit_level(k, stride, length, frames, produced, calls)
    return CtfPlan(mode="hybrid", length=length, frames_per_call=frames,
                   levels=levels, calls=tuple(calls))


def plan_dense(length, frames):
    """Single stride-1 level: each call chains on the previous one."""
    _check_common(length, frames)
    produced: dict[int, int] = {}
    calls: list[InferenceCall] = []
    _emit_level(0, 1, length, frames, produced, calls)
    return CtfPlan(mode="dense", length=length, frames_per_call=frames,
                   levels=(1,), calls=tuple(calls))


def plan_infill_only(length, frames, levels=(15, 1)):
    """First/last-guided variant: every window spans a full parent gap.

    Each level's windows must start and end on parent keyframes, which
    forces consecutive intervals into ratio frames-1 and a synthesized
    coarsest interval of (frames-1) * levels[0].
    """
    _check_common(length, frames)
    levels = _check_levels(levels)
    full = ((frames - 1) * levels[0],) + levels
    for a, b in zip(full, full[1:]):
        if a != (frames - 1) * b:
            raise ValueError(
                f"infill-only needs interval ratio {frames - 1} between levels, "
                f"got {a}/{b} (windows must span one parent gap)")
    produced: dict[int, int] = {}
    calls: list[InferenceCall] = []
    for k, stride in enumerate(full):
        _emit_level(k, stride, length, frames, produced, calls)
    return CtfPlan(mode="infill-only", length=length, frames_per_call=frames,
                   levels=full, calls=tuple(calls))


def chain_depth(plan):
    """Longest path length in the call-dependency DAG (1 for a single call)."""
    depth: dict[int, int] = {}
    for call in plan.calls:
        best = 0
        for _, src in call.guides:
            if src not in depth:
                raise ValueError(
                    f"call {call.call_id} guides on call {src}, which does not "
                    f"precede it (cycle or dangling provenance)")
            best = max(best, depth[src])
        depth[call.call_id] = best + 1
    return max(depth.values(), default=0)


def validate_plan(plan):
    """Coverage, uniqueness, stride, and provenance checks; raises on violation."""
    produced: dict[int, int] = {}
    for call in plan.calls:
        idx = call.indices
        if not 1 <= len(idx) <= plan.frames_per_call:
            raise ValueError(f"call {call.call_id}: window of {len(idx)} slots")
        if any(b - a != call.stride for a, b in zip(idx, idx[1:])):
            raise ValueError(f"call {call.call_id}: non-uniform stride in {idx}")
        if idx[0] < 0 or idx[-1] >= plan.length:
            raise ValueError(f"call {call.call_id}: indices outside the video")
        slots = set(range(len(idx)))
        gpos = {pos for pos, _ in call.guides}
        if gpos | set(call.new_slots) != slots or gpos & set(call.new_slots):
            raise ValueError(f"call {call.call_id}: slots must split into guides + new")
        for pos, src in call.guides:
            if produced.get(idx[pos]) != src:
                raise ValueError(
                    f"call {call.call_id}: guide at frame {idx[pos]} names call "
                    f"{src}, but that frame was produced by {produced.get(idx[pos])}")
        for pos in call.new_slots:
            if idx[pos] in produced:
                raise ValueError(f"call {call.call_id}: frame {idx[pos]} generated twice")
            produced[idx[pos]] = call.call_id
    missing = set(range(plan.length)) - set(produced)
    if missing:
        raise ValueError(f"plan never generates frames {sorted(missing)[:8]}...")
    return True


def format_plan_table(plan):
    """Human-readable dump; the last line is `calls=N chain_depth=D`."""
    lines = [f"mode={plan.mode} length={plan.length} frames={plan.frames_per_call} "
             f"levels={','.join(str(x) for x in plan.levels)}",
             "call  level  stride  indices                          guides(frame<-call)"]
    for c in plan.calls:
        idx = _abbrev([str(i) for i in c.indices])
        guides = _abbrev([f"{c.indices[pos]}<-{src}" for pos, src in c.guides]) or "-"
        lines.append(f"{c.call_id:<5d} {c.level:<6d} {c.stride:<7d} {idx:<32s} {guides}")
    lines.append(f"calls={plan.num_calls} chain_depth={chain_depth(plan)}")
    return "\n".join(lines)


def _abbrev(parts, head=4, tail=2):
    if len(parts) <= head + tail + 1:
        return ",".join(parts)
    return ",".join(parts[:head]) + ",..," + ",".join(parts[-tail:])


def plan_depth_csv(plan):
    """CSV of per-call dependency depth."""
    depth: dict[int, int] = {}
    rows = ["call_id,depth"]
    for call in plan.calls:
        d = 1 + max((depth[src] for _, src in call.guides), default=0)
        depth[call.call_id] = d
        rows.append(f"{call.call_id},{d}")
    return "\n".join(rows) + "\n"


def _worker_count(workers):
    # M3DDM_THREADS is both the default and the cap for explicit requests
    cap = None
    env = os.environ.get("M3DDM_THREADS")
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            cap = None
    if workers is None:
        workers = cap if cap is not None else 1
    elif cap is not None:
        workers = min(workers, cap)
    return max(1, workers)


def execute_plan(plan, frames, mask, params, cfg, schedule,
                 sampler=SamplerConfig(), guidance=GuidanceConfig(), seed=0,
                 init="pure", workers=None):
    """Run every call in dependency order and assemble the output video.

    frames: (T, C, H, W) ground-truth video (context source; its hidden
    region is never read), mask: (H, W) bool of visible pixels.  Each
    call draws from an independent stream keyed by (seed, call id), so
    results do not depend on worker count.  Returns (out_frames,
    records) where records carry per-call level, indices, hidden-region
    MSE against `frames`, and runtime.
    """
    validate_plan(plan)
    frames = np.asarray(frames, dtype=np.float32)
    t_total, c, h, w = frames.shape
    if t_total != plan.length:
        raise ValueError(f"plan covers {plan.length} frames, video has {t_total}")
    store = np.zeros_like(frames)
    done = np.zeros(t_total, dtype=bool)
    gidx = np.round(np.linspace(0, t_total - 1, cfg.global_frames)).astype(int)
    global_frames = frames[gidx]
    hidden = ~mask

    def run_call(call):
        t0 = time.perf_counter()
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                           spawn_key=(call.call_id,)))
        guide_pos = set(call.guide_positions)
        pad = plan.frames_per_call - len(call.indices)
        eff = list(call.indices) + [min(call.indices[-1] + (k + 1) * call.stride,
                                        t_total - 1) for k in range(pad)]
        roles = [FrameRole.GUIDE_RAW if pos in guide_pos else FrameRole.CONTEXT_ONLY
                 for pos in range(len(eff))]
        content = [store[idx] if pos in guide_pos else frames[idx]
                   for pos, idx in enumerate(eff)]
        fps = min(max(call.stride, FPS_RANGE[0]), FPS_RANGE[1])
        out = outpaint_clip(content, roles, mask, global_frames, fps, params, cfg,
                            schedule, sampler=sampler, guidance=guidance, rng=rng,
                            init=init)
        mse = None
        if hidden.any():
            diff = out[list(call.new_slots)] - frames[list(call.new_indices)]
            mse = float(np.mean(diff[..., hidden] ** 2, dtype=np.float64))
        return call, out, mse, time.perf_counter() - t0

    records = []

    def finish(call, out, mse, elapsed):
        for pos in call.new_slots:
            store[call.indices[pos]] = out[pos]
            done[call.indices[pos]] = True
        records.append({"call_id": call.call_id, "level": call.level,
                        "stride": call.stride, "indices": call.indices,
                        "hidden_mse": mse, "runtime_s": elapsed})

    n_workers = _worker_count(workers)
    if n_workers == 1:
        for call in plan.calls:
            finish(*run_call(call))
    else:
        pending = list(plan.calls)
        finished: set[int] = set()
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            while pending:
                ready = [c for c in pending
                         if all(src in finished for _, src in c.guides)]
                results = list(pool.map(run_call, ready))
                for res in results:
                    finish(*res)
                    finished.add(res[0].call_id)
                pending = [c for c in pending if c.call_id not in finished]
    assert done.all()
    records.sort(key=lambda r: r["call_id"])
    return store, records
