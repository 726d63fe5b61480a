"""Dense tensors with reverse-mode automatic differentiation.

Small, CPU-only, float32 by default.  Ops record onto an explicit Tape
(creation order is already topological order); gradients are pulled back
by walking the tape in reverse.  Reductions accumulate in float64 before
casting back to the storage dtype.  Every op is also usable without an
active tape, in which case it is a plain numpy computation.
"""

from __future__ import annotations

import math
import os
import struct
import tempfile

import numpy as np

__all__ = [
    "Tensor", "Tape", "ParamStore", "Adam",
    "tensor", "parameter", "backward",
    "add", "sub", "mul", "scale", "silu", "matmul",
    "conv2d", "conv1d_time", "group_norm", "softmax", "attention",
    "sinusoidal_embedding", "upsample2x", "concat", "reshape", "slice_last",
    "transpose", "sum_all", "mean_all",
    "gradcheck", "save_checkpoint", "load_checkpoint",
]

CHECKPOINT_MAGIC = b"M3DT"
CHECKPOINT_VERSION = 1


class Tensor:
    """A shaped float buffer, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "grad", "_tape")

    def __init__(self, data, requires_grad=False, dtype=np.float32):
        self.data = np.asarray(data, dtype=dtype)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Light sugar; the op functions below do the real work.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)


def tensor(data, requires_grad=False, dtype=np.float32):
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def parameter(data, dtype=np.float32):
    return Tensor(data, requires_grad=True, dtype=dtype)


class Tape:
    """Ordered record of op applications for one forward pass.

    Nodes are appended in creation order, so every node's inputs precede
    it and a single reverse sweep visits each node exactly once.
    """

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        _push_tape(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _pop_tape(self)
        return False

    def record(self, out, pulls):
        """Register `out` with its (input, pull_fn) pairs."""
        self.nodes.append((out, pulls))
        out._tape = self

    def backward(self, loss, seed_grad=1.0):
        """Populate .grad on every tracked tensor reachable from `loss`.

        `seed_grad` scales the whole gradient, for callers accumulating
        an average over several backward passes.
        """
        if loss.data.ndim != 0 and loss.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
        if loss.grad is None:
            loss.grad = np.zeros_like(loss.data)
        loss.grad = loss.grad + np.asarray(seed_grad, dtype=loss.data.dtype)
        for out, pulls in reversed(self.nodes):
            g = out.grad
            if g is None:
                continue
            for inp, pull in pulls:
                if not inp.requires_grad:
                    continue
                contrib = pull(g)
                if inp.grad is None:
                    if contrib.dtype != inp.data.dtype:
                        inp.grad = contrib.astype(inp.data.dtype)
                    elif np.may_share_memory(contrib, g):
                        # identity-style pulls hand back (views of) g itself;
                        # own the buffer before later accumulation mutates it
                        inp.grad = contrib.copy()
                    else:
                        inp.grad = contrib
                else:
                    inp.grad += contrib
            out.grad = None  # free intermediate gradient buffers eagerly


_TAPE_STACK: list[Tape] = []


def _push_tape(t):
    _TAPE_STACK.append(t)


def _pop_tape(t):
    if not _TAPE_STACK or _TAPE_STACK[-1] is not t:
        raise RuntimeError("tape stack corrupted: exiting a tape that is not innermost")
    _TAPE_STACK.pop()


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else np.float32
    return Tensor(np.asarray(x, dtype=dtype))


def _make(out_data, pulls):
    """Create the op output, recording it when any input is tracked."""
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.grad = None
    out._tape = None
    out.requires_grad = any(inp.requires_grad for inp, _ in pulls)
    tape = _active_tape()
    if tape is not None and out.requires_grad:
        tape.record(out, pulls)
    return out


def backward(loss, params=None, seed_grad=1.0):
    """Reverse sweep from a scalar loss; optionally zero-fill params left untouched."""
    if loss._tape is None:
        raise ValueError("loss is not attached to a tape (was it computed inside `with Tape()`?)")
    loss._tape.backward(loss, seed_grad=seed_grad)
    if params is not None:
        params.ensure_grads()


def _unbroadcast(grad, shape, dtype):
    """Sum `grad` down to `shape` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)), dtype=np.float64)
    keep = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if keep:
        grad = grad.sum(axis=keep, keepdims=True, dtype=np.float64)
    return grad.astype(dtype, copy=False)


# ---------------------------------------------------------------------------
# elementwise ops
# ---------------------------------------------------------------------------

def add(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    out = a.data + b.data
    return _make(out, [
        (a, lambda g: _unbroadcast(g, a.data.shape, a.data.dtype)),
        (b, lambda g: _unbroadcast(g, b.data.shape, b.data.dtype)),
    ])


def sub(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    out = a.data - b.data
    return _make(out, [
        (a, lambda g: _unbroadcast(g, a.data.shape, a.data.dtype)),
        (b, lambda g: _unbroadcast(-g, b.data.shape, b.data.dtype)),
    ])


def mul(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    out = a.data * b.data
    return _make(out, [
        (a, lambda g: _unbroadcast(g * b.data, a.data.shape, a.data.dtype)),
        (b, lambda g: _unbroadcast(g * a.data, b.data.shape, b.data.dtype)),
    ])


def scale(a, s):
    """Multiply by a python scalar (kept weak so float32 stays float32)."""
    s = float(s)
    out = a.data * s
    return _make(out, [(a, lambda g: g * s)])


def silu(x):
    """x * sigmoid(x).  The exponent is clamped at +-60, where the
    sigmoid already saturates below float32 resolution."""
    xd = x.data
    sig = np.clip(xd, -60.0, 60.0)
    np.negative(sig, out=sig)
    np.exp(sig, out=sig)
    sig += 1.0
    np.reciprocal(sig, out=sig)
    out = xd * sig

    def pull(g):
        return g * (sig * (1.0 + xd * (1.0 - sig)))

    return _make(out, [(x, pull)])


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a, b):
    """Matrix product; supports stacked (batched) operands like np.matmul."""
    ad, bd = a.data, b.data
    if ad.shape[-1] != bd.shape[-2 if bd.ndim > 1 else 0]:
        raise ValueError(f"matmul: inner dims differ, {ad.shape} @ {bd.shape}")
    out = np.matmul(ad, bd)

    def pull_a(g):
        ga = np.matmul(g, np.swapaxes(bd, -1, -2))
        return _unbroadcast(ga, ad.shape, ad.dtype)

    def pull_b(g):
        gb = np.matmul(np.swapaxes(ad, -1, -2), g)
        return _unbroadcast(gb, bd.shape, bd.dtype)

    return _make(out, [(a, pull_a), (b, pull_b)])


# ---------------------------------------------------------------------------
# convolutions (channels-last layout: fields are (..., H, W, C))
# ---------------------------------------------------------------------------

def _pad_hw(x, pad):
    """Zero-pad the two spatial axes of (N, H, W, C)."""
    if pad == 0:
        return x
    n, h, w, c = x.shape
    out = np.zeros((n, h + 2 * pad, w + 2 * pad, c), dtype=x.dtype)
    out[:, pad:pad + h, pad:pad + w] = x
    return out


def _gather_cols(xp, k, stride):
    """(N, Hp, Wp, C) -> (N*OH*OW, k*k*C) patch matrix; rows are (k, k, C),
    so the innermost copy axis is the contiguous channel run."""
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(1, 2))
    win = win[:, ::stride, ::stride].transpose(0, 1, 2, 4, 5, 3)
    n, oh, ow = win.shape[:3]
    return win.reshape(n * oh * ow, -1), oh, ow


def conv2d(x, w, b=None, stride=1):
    """Spatial convolution, square odd kernel, zero padding k//2.

    x: (N, H, W, Cin); w: (k, k, Cin, Cout); stride 1 or 2.  Channels
    last keeps the inner product contiguous, so the forward is a single
    gather plus one matmul; the input gradient is the correlation of the
    (stride-dilated) output gradient with the flipped kernel, computed
    through the same gather.
    """
    xd, wd = x.data, w.data
    if xd.ndim != 4 or wd.ndim != 4:
        raise ValueError(f"conv2d: expected 4-d input and kernel, got {xd.shape} and {wd.shape}")
    if xd.shape[3] != wd.shape[2]:
        raise ValueError(f"conv2d: channel mismatch, input {xd.shape} vs kernel {wd.shape}")
    if stride not in (1, 2):
        raise ValueError(f"conv2d: stride must be 1 or 2, got {stride}")
    n, h, wdt, cin = xd.shape
    k, k2, _, cout = wd.shape
    if k != k2 or k % 2 == 0:
        raise ValueError(f"conv2d: kernel must be square and odd, got {wd.shape}")
    pad = k // 2
    xp = _pad_hw(xd, pad)
    cols, oh, ow = _gather_cols(xp, k, stride)
    wmat = wd.reshape(k * k * cin, cout)
    out2 = cols @ wmat
    if b is not None:
        out2 = out2 + b.data
    out = out2.reshape(n, oh, ow, cout)
    # keep the small padded input; the patch matrix is re-gathered on demand
    del cols, out2

    def pull_x(g):
        if stride == 1:
            gd = g
        else:
            gd = np.zeros((n, (oh - 1) * stride + 1, (ow - 1) * stride + 1, cout),
                          dtype=g.dtype)
            gd[:, ::stride, ::stride] = g
        gp = _pad_hw(gd, k - 1)
        gcols, xh, xw = _gather_cols(gp, k, 1)
        # match against the spatially flipped, channel-swapped kernel
        wb = np.ascontiguousarray(wd[::-1, ::-1].transpose(0, 1, 3, 2)) \
            .reshape(k * k * cout, cin)
        core = (gcols @ wb).reshape(n, xh, xw, cin)
        hp, wp = xp.shape[1], xp.shape[2]
        if (xh, xw) != (hp, wp):  # stride 2 leaves untouched trailing rows/cols
            full = np.zeros_like(xp)
            full[:, :xh, :xw] = core
            core = full
        if pad:
            return core[:, pad:-pad, pad:-pad]
        return core

    def pull_w(g):
        g2 = g.reshape(n * oh * ow, cout)
        cols2, _, _ = _gather_cols(xp, k, stride)
        return (cols2.T @ g2).reshape(k, k, cin, cout)

    pulls = [(x, pull_x), (w, pull_w)]
    if b is not None:
        pulls.append((b, lambda g: g.sum(axis=(0, 1, 2), dtype=np.float64).astype(b.data.dtype)))
    return _make(out, pulls)


def conv1d_time(x, w, b=None):
    """Width-3 convolution over the frame axis, zero padded.

    x: (B, F, H, W, C); w: (3, Cin, Cout).  Mixes adjacent frames of the
    same clip only; the batch axis keeps clips apart.
    """
    xd, wd = x.data, w.data
    if xd.ndim != 5 or wd.ndim != 3 or wd.shape[0] != 3:
        raise ValueError(f"conv1d_time: expected (B,F,H,W,C) and (3,Cin,Cout), "
                         f"got {xd.shape} and {wd.shape}")
    if xd.shape[4] != wd.shape[1]:
        raise ValueError(f"conv1d_time: channel mismatch, input {xd.shape} vs kernel {wd.shape}")
    bb, f, h, wdt, cin = xd.shape
    cout = wd.shape[2]
    xp = np.zeros((bb, f + 2, h, wdt, cin), dtype=xd.dtype)
    xp[:, 1:-1] = xd
    xpf = xp.reshape(-1, cin)
    # one contiguous matmul per tap, then shifted adds
    out = (xpf @ wd[0]).reshape(bb, f + 2, h, wdt, cout)[:, 0:f]
    out = out + (xpf @ wd[1]).reshape(bb, f + 2, h, wdt, cout)[:, 1:f + 1]
    out += (xpf @ wd[2]).reshape(bb, f + 2, h, wdt, cout)[:, 2:f + 2]
    if b is not None:
        out += b.data

    def pull_x(g):
        gf = g.reshape(-1, cout)
        dxp = np.zeros_like(xp)
        for kk in range(3):
            dxp[:, kk:kk + f] += (gf @ wd[kk].T).reshape(bb, f, h, wdt, cin)
        return dxp[:, 1:-1]

    def pull_w(g):
        gf = g.reshape(-1, cout)
        dw = np.empty_like(wd)
        for kk in range(3):
            dw[kk] = np.ascontiguousarray(xp[:, kk:kk + f]).reshape(-1, cin).T @ gf
        return dw

    pulls = [(x, pull_x), (w, pull_w)]
    if b is not None:
        pulls.append((b, lambda g: g.sum(axis=(0, 1, 2, 3), dtype=np.float64).astype(b.data.dtype)))
    return _make(out, pulls)


# ---------------------------------------------------------------------------
# normalization / attention
# ---------------------------------------------------------------------------

def group_norm(x, gamma, beta, groups, eps=1e-5):
    """Group normalization with learned scale and shift, channels last.

    x: (..., H, W, C); statistics are per (leading axes, group) over the
    spatial extent and the group's channels, accumulated in float64.
    """
    xd = x.data
    if xd.ndim < 4:
        raise ValueError(f"group_norm: expected at least (N, H, W, C), got {xd.shape}")
    c = xd.shape[-1]
    if c % groups:
        raise ValueError(f"group_norm: {groups} groups do not divide {c} channels")
    lead = xd.shape[:-3]
    h, w = xd.shape[-3], xd.shape[-2]
    nb = int(np.prod(lead)) if lead else 1
    cg = c // groups
    m = h * w * cg
    xg = xd.reshape(nb, h * w, groups, cg)

    def _gmean(v):
        # contiguous inner-axis pass first, then the short strided one
        return v.sum(axis=3, dtype=np.float64).sum(axis=1)[:, None, :, None] / m

    mu = _gmean(xg)
    var = _gmean(xg * xg) - mu * mu
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xg - mu.astype(xd.dtype)) * inv.astype(xd.dtype)
    out = xhat.reshape(xd.shape) * gamma.data + beta.data

    def pull_x(g):
        gxh = (g * gamma.data).reshape(nb, h * w, groups, cg)
        mean_g = _gmean(gxh)
        mean_gx = _gmean(gxh * xhat)
        dx = inv.astype(xd.dtype) * (gxh - mean_g.astype(xd.dtype)
                                     - xhat * mean_gx.astype(xd.dtype))
        return dx.reshape(xd.shape)

    def pull_gamma(g):
        flat = (g * xhat.reshape(xd.shape)).reshape(-1, c)
        return flat.sum(axis=0, dtype=np.float64).astype(gamma.data.dtype)

    def pull_beta(g):
        return g.reshape(-1, c).sum(axis=0, dtype=np.float64).astype(beta.data.dtype)

    return _make(out.astype(xd.dtype, copy=False),
                 [(x, pull_x), (gamma, pull_gamma), (beta, pull_beta)])


def softmax(x, axis=-1):
    xd = x.data
    out = xd - xd.max(axis=axis, keepdims=True)
    np.exp(out, out=out)
    out /= out.sum(axis=axis, keepdims=True)

    def pull(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return out * (g - dot)

    return _make(out, [(x, pull)])


def attention(q, k, v):
    """Scaled dot-product attention over the last two axes.

    q: (..., Lq, D); k: (..., Lk, D); v: (..., Lk, Dv).  Exact (no masking).
    """
    d = q.data.shape[-1]
    scores = scale(matmul(q, _swap_last(k)), 1.0 / math.sqrt(d))
    return matmul(softmax(scores, axis=-1), v)


def _swap_last(t):
    perm = list(range(t.data.ndim))
    perm[-1], perm[-2] = perm[-2], perm[-1]
    return transpose(t, tuple(perm))


def sinusoidal_embedding(value, dim, dtype=np.float32):
    """Classic sin/cos positional embedding of a scalar step index."""
    if dim % 2:
        raise ValueError(f"sinusoidal_embedding: dim must be even, got {dim}")
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half, dtype=np.float64) / half)
    ang = float(value) * freqs
    emb = np.concatenate([np.sin(ang), np.cos(ang)]).astype(dtype)
    return Tensor(emb.reshape(1, dim), dtype=dtype)


# ---------------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------------

def upsample2x(x):
    """Nearest-neighbour 2x upsampling of (..., H, W, C)."""
    xd = x.data
    out = np.repeat(np.repeat(xd, 2, axis=-3), 2, axis=-2)
    lead = xd.shape[:-3]
    h, w, c = xd.shape[-3:]

    def pull(g):
        gr = g.reshape(lead + (h, 2, w, 2, c))
        return gr.sum(axis=(-4, -2), dtype=np.float64).astype(xd.dtype)

    return _make(out, [(x, pull)])


def concat(tensors, axis):
    datas = [t.data for t in tensors]
    out = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def make_pull(i):
        sl = [slice(None)] * out.ndim
        sl[axis] = slice(int(offsets[i]), int(offsets[i + 1]))
        sl = tuple(sl)
        return lambda g: g[sl]

    return _make(out, [(t, make_pull(i)) for i, t in enumerate(tensors)])


def reshape(x, shape):
    xd = x.data
    out = xd.reshape(shape)
    return _make(out, [(x, lambda g: g.reshape(xd.shape))])


def slice_last(x, start, stop):
    """Contiguous slice [start:stop) of the last axis."""
    xd = x.data
    out = np.ascontiguousarray(xd[..., start:stop])

    def pull(g):
        full = np.zeros_like(xd)
        full[..., start:stop] = g
        return full

    return _make(out, [(x, pull)])


def transpose(x, axes):
    xd = x.data
    out = np.ascontiguousarray(xd.transpose(axes))
    inv = np.argsort(axes)

    def pull(g):
        return np.ascontiguousarray(g.transpose(inv))

    return _make(out, [(x, pull)])


def sum_all(x):
    xd = x.data
    out = np.asarray(xd.sum(dtype=np.float64), dtype=xd.dtype)
    return _make(out, [(x, lambda g: np.broadcast_to(g, xd.shape).copy())])


def mean_all(x):
    xd = x.data
    inv_n = 1.0 / xd.size
    out = np.asarray(xd.mean(dtype=np.float64), dtype=xd.dtype)
    return _make(out, [(x, lambda g: np.broadcast_to(g * xd.dtype.type(inv_n), xd.shape).copy())])


# ---------------------------------------------------------------------------
# parameters and optimizer
# ---------------------------------------------------------------------------

class ParamStore:
    """Named parameter tensors; iteration is sorted by name."""

    def __init__(self):
        self._entries: dict[str, Tensor] = {}

    def add(self, name, data, dtype=np.float32):
        if name in self._entries:
            raise ValueError(f"duplicate parameter name: {name}")
        t = data if isinstance(data, Tensor) else Tensor(data, requires_grad=True, dtype=dtype)
        t.requires_grad = True
        self._entries[name] = t
        return t

    def __getitem__(self, name):
        return self._entries[name]

    def __contains__(self, name):
        return name in self._entries

    def __len__(self):
        return len(self._entries)

    def names(self):
        return sorted(self._entries)

    def items(self):
        for name in self.names():
            yield name, self._entries[name]

    def zero_grads(self):
        for _, t in self.items():
            t.grad = None

    def ensure_grads(self):
        """Give every parameter a grad buffer; zeros when untouched by backward."""
        for _, t in self.items():
            if t.grad is None:
                t.grad = np.zeros_like(t.data)

    def num_values(self):
        return sum(t.data.size for t in self._entries.values())

    def copy(self):
        out = ParamStore()
        for name, t in self.items():
            out.add(name, t.data.copy(), dtype=t.data.dtype)
        return out


class Adam:
    """Adam with a linear learning-rate warmup from zero.

    Effective lr at integer step s is lr * min(1, s / warmup); moments are
    kept per parameter.  Steps must be strictly increasing.
    """

    def __init__(self, params, lr=1e-4, warmup=1000, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.lr = float(lr)
        self.warmup = int(warmup)
        self.beta1, self.beta2 = betas
        self.eps = float(eps)
        self._m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self._v = {name: np.zeros_like(t.data) for name, t in params.items()}
        self._last_step = -1

    def effective_lr(self, step):
        if self.warmup <= 0:
            return self.lr
        return self.lr * min(1.0, step / self.warmup)

    def step(self, step=None):
        """One in-place update using the grads currently stored on the params."""
        if step is None:
            step = self._last_step + 1
        if step <= self._last_step:
            raise ValueError(f"step counter must increase: got {step} after {self._last_step}")
        self._last_step = step
        lr = self.effective_lr(step)
        t = step + 1  # bias correction uses 1-based count
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** t
        c2 = 1.0 - b2 ** t
        for name, p in self.params.items():
            if p.grad is None:
                raise ValueError(f"parameter {name!r} has no gradient; run backward first")
            g = p.grad
            m = self._m[name]
            v = self._v[name]
            m += (1.0 - b1) * (g - m)
            v += (1.0 - b2) * (g * g - v)
            upd = (lr / c1) * m / (np.sqrt(v / c2) + self.eps)
            if not np.all(np.isfinite(upd)):
                raise FloatingPointError(f"non-finite update for parameter {name!r}")
            p.data -= upd.astype(p.data.dtype, copy=False)
        return lr


# ---------------------------------------------------------------------------
# finite-difference checking
# ---------------------------------------------------------------------------

def gradcheck(fn, inputs, h=1e-6, rng=None):
    """Compare reverse-mode grads of scalar fn(*inputs) against central differences.

    Inputs are float64 tensors (64-bit check precision).  Returns the
    maximum relative error over all inputs, where each input's error is
    ||g_ad - g_fd||_inf / max(||g_fd||_inf, 1).
    """
    for t in inputs:
        if t.data.dtype != np.float64:
            raise ValueError("gradcheck expects float64 inputs")
        t.requires_grad = True
        t.grad = None
    with Tape() as tape:
        out = fn(*inputs)
        if out.data.size != 1:
            out = sum_all(out)
    tape.backward(out)
    worst = 0.0
    for t in inputs:
        g_ad = t.grad if t.grad is not None else np.zeros_like(t.data)
        g_fd = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        fd = g_fd.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            step = h * max(1.0, abs(orig))
            flat[i] = orig + step
            fp = _eval_scalar(fn, inputs)
            flat[i] = orig - step
            fm = _eval_scalar(fn, inputs)
            flat[i] = orig
            fd[i] = (fp - fm) / (2.0 * step)
        denom = max(np.abs(g_fd).max(), 1.0)
        err = np.abs(g_ad - g_fd).max() / denom
        worst = max(worst, float(err))
    return worst


def _eval_scalar(fn, inputs):
    out = fn(*inputs)
    return float(out.data.sum(dtype=np.float64))


# ---------------------------------------------------------------------------
# checkpoint I/O
# ---------------------------------------------------------------------------

def save_checkpoint(path, params, header=None):
    """Write params to `path` atomically.

    Layout (all little-endian): magic "M3DT", u32 version, u32 header
    length + UTF-8 key=value lines, u32 entry count, then per entry
    u16 name length + name, u32 rank, u64 dims, raw f32 payload.
    """
    chunks = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION)]
    htext = b""
    if header:
        htext = "".join(f"{k}={v}\n" for k, v in sorted(header.items())).encode()
    chunks.append(struct.pack("<I", len(htext)))
    chunks.append(htext)
    chunks.append(struct.pack("<I", len(params)))
    for name, t in params.items():
        if t.data.dtype != np.float32:
            raise ValueError(f"checkpoint stores float32 only; {name!r} is {t.data.dtype}")
        nb = name.encode()
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<I", t.data.ndim))
        chunks.append(struct.pack(f"<{t.data.ndim}Q", *t.data.shape))
        chunks.append(np.ascontiguousarray(t.data, dtype="<f4").tobytes())
    _write_atomic(path, b"".join(chunks))


def load_checkpoint(path):
    """Read a checkpoint; returns (ParamStore, header dict)."""
    with open(path, "rb") as f:
        blob = f.read()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(blob):
            raise ValueError(f"truncated checkpoint: {path}")
        piece = blob[off:off + n]
        off += n
        return piece

    if take(4) != CHECKPOINT_MAGIC:
        raise ValueError(f"not a checkpoint file: {path}")
    (version,) = struct.unpack("<I", take(4))
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version} in {path}")
    (hlen,) = struct.unpack("<I", take(4))
    header = {}
    for line in take(hlen).decode().splitlines():
        if line:
            k, _, v = line.partition("=")
            header[k] = v
    (count,) = struct.unpack("<I", take(4))
    params = ParamStore()
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode()
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}Q", take(8 * rank))
        size = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(take(4 * size), dtype="<f4").reshape(dims).copy()
        params.add(name, data)
    if off != len(blob):
        raise ValueError(f"trailing bytes in checkpoint: {path}")
    return params, header


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
