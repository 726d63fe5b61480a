"""Synthetic video corpus generation and binary file formats.

Videos are float32 (T, C, H, W) with values in [0, 1].  Three motifs:
a bouncing square, a drifting sinusoid gradient, and a wrapping pan over
a smooth random texture.  All generation is deterministic per seed.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

__all__ = ["Video", "SyntheticSpec", "generate_video", "gen_corpus",
           "write_corpus", "read_corpus", "corpus_file_size",
           "write_pgm", "read_pgm", "write_ppm", "write_frames"]

CORPUS_MAGIC = b"M3DV"
CORPUS_VERSION = 1

MOTIFS = ("moving-square", "moving-gradient", "panning-texture")


@dataclass(frozen=True)
class Video:
    frames: np.ndarray  # (T, C, H, W) float32 in [0, 1]
    fps: int = 8

    @property
    def length(self):
        return self.frames.shape[0]


@dataclass(frozen=True)
class SyntheticSpec:
    motif: str = "moving-square"
    length: int = 32
    height: int = 16
    width: int = 16
    channels: int = 1
    speed: float = 1.0      # nominal pixels per frame
    amplitude: float = 0.8  # contrast of the moving structure
    seed: int = 0

    def __post_init__(self):
        if self.motif not in MOTIFS:
            raise ValueError(f"unknown motif {self.motif!r}; choose from {MOTIFS}")
        if min(self.length, self.height, self.width, self.channels) < 1:
            raise ValueError("length, height, width, channels must be positive")


def _reflect(pos, limit):
    # bounce a scalar trajectory inside [0, limit]
    if limit == 0:
        return np.zeros_like(pos)
    period = 2 * limit
    pos = np.mod(pos, period)
    return np.where(pos > limit, period - pos, pos)


def _moving_square(spec, rng):
    # horizontal bounce at a fixed row: the hidden-side content is fully
    # determined by the square's phase, which any visible glimpse reveals
    t = np.arange(spec.length)
    side = max(3, min(spec.height, spec.width) // 3)
    vx = float(rng.choice([-1, 1])) * spec.speed
    x0 = float(rng.integers(0, max(1, spec.width - side)))
    y0 = int(rng.integers(0, max(1, spec.height - side)))
    xs = np.round(_reflect(x0 + vx * t, spec.width - side)).astype(int)
    lo = 0.5 - spec.amplitude / 2
    hi = 0.5 + spec.amplitude / 2
    frames = np.full((spec.length, spec.channels, spec.height, spec.width), lo,
                     dtype=np.float32)
    for i in range(spec.length):
        frames[i, :, y0:y0 + side, xs[i]:xs[i] + side] = hi
    return frames


def _moving_gradient(spec, rng):
    t = np.arange(spec.length)[:, None, None, None]
    i = np.arange(spec.height)[None, None, :, None]
    j = np.arange(spec.width)[None, None, None, :]
    kx = rng.uniform(0.5, 2.0)
    ky = rng.uniform(-1.0, 1.0)
    phase0 = rng.uniform(0, 2 * np.pi, size=spec.channels)[None, :, None, None]
    omega = 2 * np.pi * spec.speed / spec.width
    ang = 2 * np.pi * (kx * j / spec.width + ky * i / spec.height) + phase0 + omega * t
    return (0.5 + 0.5 * spec.amplitude * np.sin(ang)).astype(np.float32)


def _panning_texture(spec, rng):
    base = rng.random((spec.channels, spec.height, spec.width))
    for axis in (1, 2):  # box blur to make it smooth
        base = (np.roll(base, 1, axis) + base + np.roll(base, -1, axis)) / 3.0
    lo, hi = base.min(), base.max()
    base = 0.5 + spec.amplitude * ((base - lo) / max(hi - lo, 1e-9) - 0.5)
    vx = float(rng.choice([-2, -1, 1, 2])) * spec.speed
    vy = float(rng.choice([-1, 0, 1])) * spec.speed
    frames = np.empty((spec.length, spec.channels, spec.height, spec.width), np.float32)
    for i in range(spec.length):
        dy, dx = int(round(vy * i)), int(round(vx * i))
        frames[i] = np.roll(np.roll(base, dy, axis=1), dx, axis=2)
    return frames.astype(np.float32)


_GENERATORS = {
    "moving-square": _moving_square,
    "moving-gradient": _moving_gradient,
    "panning-texture": _panning_texture,
}


def generate_video(spec, index=0, fps=8):
    """One deterministic video; `index` selects an independent stream."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.seed,
                                                       spawn_key=(index,)))
    frames = _GENERATORS[spec.motif](spec, rng)
    assert frames.min() >= 0.0 and frames.max() <= 1.0
    return Video(frames=frames, fps=fps)


def gen_corpus(spec, count, fps=8):
    return [generate_video(spec, i, fps=fps) for i in range(count)]


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def write_corpus(path, videos):
    """magic "M3DV", u32 version, u32 count, then per video u32 T,H,W,C,
    u32 fps and raw little-endian f32 frames (row-major T,C,H,W)."""
    chunks = [CORPUS_MAGIC, struct.pack("<II", CORPUS_VERSION, len(videos))]
    for v in videos:
        t, c, h, w = v.frames.shape
        chunks.append(struct.pack("<IIIII", t, h, w, c, v.fps))
        chunks.append(np.ascontiguousarray(v.frames, dtype="<f4").tobytes())
    _write_atomic(path, b"".join(chunks))


def read_corpus(path):
    with open(path, "rb") as f:
        blob = f.read()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(blob):
            raise ValueError(f"truncated corpus file: {path}")
        piece = blob[off:off + n]
        off += n
        return piece

    if take(4) != CORPUS_MAGIC:
        raise ValueError(f"not a corpus file: {path}")
    version, count = struct.unpack("<II", take(8))
    if version != CORPUS_VERSION:
        raise ValueError(f"unsupported corpus version {version} in {path}")
    videos = []
    for _ in range(count):
        t, h, w, c, fps = struct.unpack("<IIIII", take(20))
        data = np.frombuffer(take(4 * t * c * h * w), dtype="<f4")
        videos.append(Video(frames=data.reshape(t, c, h, w).copy(), fps=fps))
    if off != len(blob):
        raise ValueError(f"trailing bytes in corpus file: {path}")
    return videos


def corpus_file_size(videos):
    """Exact byte size write_corpus will produce."""
    return 12 + sum(20 + 4 * int(np.prod(v.frames.shape)) for v in videos)


def _quantize(image):
    return np.clip(np.round(np.asarray(image, dtype=np.float64) * 255.0),
                   0, 255).astype(np.uint8)


def write_pgm(path, image):
    """Binary PGM of one (H, W) image in [0, 1]."""
    img = _quantize(image)
    if img.ndim != 2:
        raise ValueError(f"PGM wants (H, W), got {img.shape}")
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    _write_atomic(path, header + img.tobytes())


def read_pgm(path):
    """Binary PGM -> (H, W) float32 in [0, 1]."""
    with open(path, "rb") as f:
        blob = f.read()
    parts = blob.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise ValueError(f"not a binary PGM: {path}")
    w, h = (int(x) for x in parts[1].split())
    maxval = int(parts[2])
    img = np.frombuffer(parts[3][:h * w], dtype=np.uint8).reshape(h, w)
    return (img / maxval).astype(np.float32)


def write_ppm(path, image):
    """Binary PPM of one (3, H, W) image in [0, 1]."""
    img = _quantize(image)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"PPM wants (3, H, W), got {img.shape}")
    header = f"P6\n{img.shape[2]} {img.shape[1]}\n255\n".encode()
    _write_atomic(path, header + img.transpose(1, 2, 0).tobytes())


def write_frames(directory, frames, prefix="frame"):
    """One PGM (C=1) or PPM (C=3) per frame; returns the paths written."""
    os.makedirs(directory, exist_ok=True)
    frames = np.asarray(frames)
    paths = []
    for i, frame in enumerate(frames):
        if frame.shape[0] == 1:
            p = os.path.join(directory, f"{prefix}_{i:05d}.pgm")
            write_pgm(p, frame[0])
        elif frame.shape[0] == 3:
            p = os.path.join(directory, f"{prefix}_{i:05d}.ppm")
            write_ppm(p, frame)
        else:
            raise ValueError(f"cannot write {frame.shape[0]}-channel frames")
        paths.append(p)
    return paths


def _write_atomic(path, data):
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
