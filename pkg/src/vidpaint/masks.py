"""Edge-mask sampling, guide-frame roles, and per-clip conditioning assembly.

Masks are axis-aligned rectangles of visible pixels (True = visible).
A drawn ratio is the fraction of an axis removed in total; it is split
equally across that axis's active sides, extra pixel to the left/top.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "MaskStrategy", "FrameRole", "MaskSpec", "ClipConditioning",
    "STRATEGY_WEIGHTS", "GUIDE_CASE_WEIGHTS", "GUIDE_FRAME_PROB",
    "RATIO_RANGE", "make_rect_mask", "sample_mask", "sample_guide_case",
    "assemble_conditioning", "validate_conditioning",
]


class MaskStrategy(str, enum.Enum):
    FOUR = "four"
    SINGLE = "single"
    BIDIR = "bidir"
    RANDOM_DIRS = "random-dirs"
    ALL = "all"


class FrameRole(str, enum.Enum):
    CONTEXT_ONLY = "context"
    GUIDE_RAW = "guide"


_STRATEGIES = (MaskStrategy.FOUR, MaskStrategy.SINGLE, MaskStrategy.BIDIR,
               MaskStrategy.RANDOM_DIRS, MaskStrategy.ALL)
STRATEGY_WEIGHTS = (0.2, 0.1, 0.35, 0.1, 0.25)
GUIDE_CASE_WEIGHTS = (0.3, 0.35, 0.35)
GUIDE_FRAME_PROB = 0.5
RATIO_RANGE = (0.15, 0.75)

_SIDES = ("left", "right", "top", "bottom")


@dataclass(frozen=True)
class MaskSpec:
    """A realized rectangular visibility mask.

    hidden_px counts removed pixels per edge (left, right, top, bottom);
    mask is (H, W) bool with True marking visible context pixels.
    """

    strategy: MaskStrategy
    ratio: float
    hidden_px: tuple[int, int, int, int]
    mask: np.ndarray

    @property
    def visible_fraction(self):
        return float(self.mask.mean())


def _split_axis(extent, ratio, lead_active, trail_active):
    """Pixels removed from the two edges of one axis."""
    if not (lead_active or trail_active):
        return 0, 0
    total = int(np.floor(ratio * extent + 0.5))
    if lead_active and trail_active:
        return (total + 1) // 2, total // 2
    return (total, 0) if lead_active else (0, total)


def make_rect_mask(height, width, strategy, ratio, sides=()):
    """Deterministic mask constructor for a given strategy and side set."""
    strategy = MaskStrategy(strategy)
    if strategy is MaskStrategy.ALL:
        return MaskSpec(strategy, 1.0, (width, 0, height, 0),
                        np.zeros((height, width), dtype=bool))
    lo, hi = RATIO_RANGE
    if not lo <= ratio <= hi:
        raise ValueError(f"ratio {ratio} outside [{lo}, {hi}]")
    bad = set(sides) - set(_SIDES)
    if bad or not sides:
        raise ValueError(f"sides must be a non-empty subset of {_SIDES}, got {sides!r}")
    left, right = _split_axis(width, ratio, "left" in sides, "right" in sides)
    top, bottom = _split_axis(height, ratio, "top" in sides, "bottom" in sides)
    mask = np.zeros((height, width), dtype=bool)
    mask[top:height - bottom, left:width - right] = True
    return MaskSpec(strategy, float(ratio), (left, right, top, bottom), mask)


def sample_mask(rng, height, width):
    """Draw a strategy, a per-axis ratio, and realize the mask."""
    strategy = _STRATEGIES[rng.choice(len(_STRATEGIES), p=STRATEGY_WEIGHTS)]
    if strategy is MaskStrategy.ALL:
        return make_rect_mask(height, width, strategy, 1.0)
    ratio = float(rng.uniform(*RATIO_RANGE))
    if strategy is MaskStrategy.FOUR:
        sides = _SIDES
    elif strategy is MaskStrategy.SINGLE:
        sides = (_SIDES[rng.integers(4)],)
    elif strategy is MaskStrategy.BIDIR:
        sides = ("left", "right") if rng.random() < 0.5 else ("top", "bottom")
    else:  # random-dirs: k distinct sides, k uniform on 1..4
        k = int(rng.integers(1, 5))
        sides = tuple(_SIDES[i] for i in sorted(rng.choice(4, size=k, replace=False)))
    return make_rect_mask(height, width, strategy, ratio, sides)


def sample_guide_case(rng, frames):
    """Draw the guide-frame layout for a clip of `frames` slots.

    Returns (case, roles): case 1 is context everywhere, case 2 anchors
    the first frame (or first and last, 50/50), case 3 promotes each
    frame independently with probability GUIDE_FRAME_PROB.
    """
    if frames < 2:
        raise ValueError(f"need at least 2 frames, got {frames}")
    u = rng.random()
    roles = [FrameRole.CONTEXT_ONLY] * frames
    if u < GUIDE_CASE_WEIGHTS[0]:
        return 1, roles
    if u < GUIDE_CASE_WEIGHTS[0] + GUIDE_CASE_WEIGHTS[1]:
        roles[0] = FrameRole.GUIDE_RAW
        if rng.random() < 0.5:
            roles[-1] = FrameRole.GUIDE_RAW
        return 2, roles
    flips = rng.random(frames) < GUIDE_FRAME_PROB
    return 3, [FrameRole.GUIDE_RAW if f else FrameRole.CONTEXT_ONLY for f in flips]


@dataclass(frozen=True)
class ClipConditioning:
    """Everything one denoiser call conditions on.

    Channel layout for the network input is [noisy | context | mask];
    global_prompt carries the masked global frames with their own mask
    channel appended.  Arrays are float32 and treated as immutable.
    """

    noisy: np.ndarray          # (F, C, H, W)
    context: np.ndarray        # (F, C, H, W), hidden pixels exactly 0
    mask: np.ndarray           # (F, 1, H, W), 1 = visible
    fps: int
    global_prompt: np.ndarray  # (g, C+1, H, W)

    def with_noisy(self, z):
        if z.shape != self.noisy.shape:
            raise ValueError(f"noisy shape {z.shape} != {self.noisy.shape}")
        return replace(self, noisy=np.asarray(z, dtype=np.float32))

    def null_context(self):
        """The no-context variant: context and mask channels all zero."""
        return replace(self, context=np.zeros_like(self.context),
                       mask=np.zeros_like(self.mask))

    def null_prompt_frames(self):
        return np.zeros_like(self.global_prompt)

    def network_input(self):
        return np.concatenate([self.noisy, self.context, self.mask], axis=1)


def assemble_conditioning(frames, roles, mask, global_frames, fps, noisy=None):
    """Build a ClipConditioning from per-slot content and a shared mask.

    `frames` is a sequence of full frames backing each slot (None marks
    missing content): guide slots contribute theirs verbatim under an
    all-ones mask, context slots contribute only the visible rectangle.
    Global frames get the same mask treatment as context so hidden
    ground truth never leaks through the prompt.
    """
    if len(frames) != len(roles):
        raise ValueError(f"{len(roles)} roles for {len(frames)} frames")
    for i, (fr, role) in enumerate(zip(frames, roles)):
        if fr is None:
            kind = "guide" if role is FrameRole.GUIDE_RAW else "context"
            raise ValueError(f"missing {kind} content for slot {i}")
    frames = np.asarray(frames, dtype=np.float32)
    global_frames = np.asarray(global_frames, dtype=np.float32)
    if frames.ndim != 4:
        raise ValueError(f"frames must be (F, C, H, W), got {frames.shape}")
    f, c, h, w = frames.shape
    if mask.shape != (h, w):
        raise ValueError(f"mask shape {mask.shape} does not match frames {frames.shape}")
    if global_frames.ndim != 4 or global_frames.shape[1:] != (c, h, w):
        raise ValueError(f"global frames must be (g, {c}, {h}, {w}), got {global_frames.shape}")

    m = mask.astype(np.float32)[None, None]                    # (1, 1, H, W)
    guide = np.array([r is FrameRole.GUIDE_RAW for r in roles])
    mask_f = np.where(guide[:, None, None, None], np.float32(1.0), m)  # (F, 1, H, W)
    context = frames * mask_f
    gp_mask = np.broadcast_to(m[0], (global_frames.shape[0], 1, h, w))
    global_prompt = np.concatenate([global_frames * gp_mask,
                                    gp_mask.astype(np.float32)], axis=1)
    if noisy is None:
        noisy = np.zeros_like(frames)
    else:
        noisy = np.asarray(noisy, dtype=np.float32)
        if noisy.shape != frames.shape:
            raise ValueError(f"noisy shape {noisy.shape} != {frames.shape}")
    return ClipConditioning(noisy=noisy, context=context,
                            mask=mask_f.astype(np.float32), fps=int(fps),
                            global_prompt=global_prompt)


def validate_conditioning(cond):
    """Assert the leakage invariants; raises AssertionError on violation."""
    vis = cond.mask > 0
    assert np.all((cond.context != 0) <= np.broadcast_to(vis, cond.context.shape)), \
        "context carries values outside the visible mask"
    g = cond.global_prompt
    gc = g.shape[1] - 1
    gvis = g[:, gc:] > 0
    assert np.all((g[:, :gc] != 0) <= np.broadcast_to(gvis, g[:, :gc].shape)), \
        "global prompt carries values outside the visible mask"
