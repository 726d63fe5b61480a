"""Tiny factorized spatiotemporal UNet noise predictor with a prompt encoder.

Every block is a spatial 3x3 conv followed by a width-3 conv over the
frame axis; learned projections of the sinusoidal step and frame-rate
embeddings modulate each block's normalized features with a per-channel
scale and shift (noise prediction needs step-dependent gain, so a pure
additive bias is not enough).  The mid block runs self-attention across
frames and cross-attention against tokens from a two-level strided
encoder of the masked global frames.

Activations flow internally as (B, F, H, W, C) float32; the public
conditioning and noise-estimate layout stays (F, C, H, W).  A batch is
one forward pass, which is how training batches clips and how sampling
evaluates its three guidance conditions at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tc

__all__ = ["DenoiserConfig", "init_denoiser", "encode_prompt",
           "encode_prompt_batch", "predict_noise", "predict_noise_batch",
           "config_header", "config_from_header"]


@dataclass(frozen=True)
class DenoiserConfig:
    frames: int = 16          # clip length F
    size: int = 16            # H = W
    channels: int = 1         # image channels
    widths: tuple[int, ...] = (16, 32)
    token_dim: int = 32       # attention/prompt token width
    heads: int = 1
    global_frames: int = 16   # prompt frames g
    emb_dim: int = 32         # sinusoidal embedding width
    groups: int = 8

    def __post_init__(self):
        if self.frames < 2:
            raise ValueError("frames must be >= 2")
        if len(self.widths) != 2 or any(w <= 0 for w in self.widths):
            raise ValueError(f"widths must be two positive ints, got {self.widths}")
        if self.token_dim % self.heads:
            raise ValueError("token_dim must be divisible by heads")
        if self.size % 4:
            raise ValueError("size must be divisible by 4 (two stride-2 levels)")
        for w in self.widths:
            if w % self.groups:
                raise ValueError(f"groups={self.groups} must divide width {w}")

    @property
    def in_channels(self):
        return 2 * self.channels + 1

    @property
    def prompt_tokens(self):
        return self.global_frames * (self.size // 4) ** 2


def config_header(cfg):
    """Flat key=value form for the checkpoint header."""
    return {
        "frames": cfg.frames, "size": cfg.size, "channels": cfg.channels,
        "widths": ",".join(str(w) for w in cfg.widths),
        "token_dim": cfg.token_dim, "heads": cfg.heads,
        "global_frames": cfg.global_frames, "emb_dim": cfg.emb_dim,
        "groups": cfg.groups,
    }


def config_from_header(header):
    return DenoiserConfig(
        frames=int(header["frames"]), size=int(header["size"]),
        channels=int(header["channels"]),
        widths=tuple(int(w) for w in header["widths"].split(",")),
        token_dim=int(header["token_dim"]), heads=int(header["heads"]),
        global_frames=int(header["global_frames"]),
        emb_dim=int(header["emb_dim"]), groups=int(header["groups"]),
    )


def _he(rng, shape, fan_in):
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(np.float32)


def init_denoiser(cfg, rng, zero_head=True):
    """Fresh ParamStore for the denoiser + prompt encoder.

    zero_head zeroes the output convolution so an untrained model
    predicts zero noise (the stable default for training); sensitivity
    checks want a live head and pass zero_head=False.
    """
    w0, w1 = cfg.widths
    d = cfg.token_dim
    e = cfg.emb_dim
    p = tc.ParamStore()

    def conv2(name, cin, cout, k=3):
        p.add(f"{name}.w", _he(rng, (k, k, cin, cout), cin * k * k))
        p.add(f"{name}.b", np.zeros(cout, dtype=np.float32))

    def convt(name, cin, cout):
        p.add(f"{name}.w", _he(rng, (3, cin, cout), cin * 3))
        p.add(f"{name}.b", np.zeros(cout, dtype=np.float32))

    def linear(name, din, dout):
        p.add(f"{name}.w", _he(rng, (din, dout), din))
        p.add(f"{name}.b", np.zeros(dout, dtype=np.float32))

    def block(name, cin, cout):
        p.add(f"{name}.gn.g", np.ones(cin, dtype=np.float32))
        p.add(f"{name}.gn.b", np.zeros(cin, dtype=np.float32))
        # embeddings modulate the normalized features with a scale and a
        # shift; noise prediction needs step-dependent gain, not just bias
        linear(f"{name}.emb_t", e, 2 * cin)
        linear(f"{name}.emb_fps", e, 2 * cin)
        conv2(f"{name}.spatial", cin, cout)
        convt(f"{name}.temporal", cout, cout)
        if cin != cout:
            conv2(f"{name}.skip", cin, cout, k=1)

    def attn(name, q_dim, kv_dim):
        p.add(f"{name}.gn.g", np.ones(q_dim, dtype=np.float32))
        p.add(f"{name}.gn.b", np.zeros(q_dim, dtype=np.float32))
        linear(f"{name}.q", q_dim, d)
        # no key bias: softmax is invariant to a constant shift per query
        p.add(f"{name}.k.w", _he(rng, (kv_dim, d), kv_dim))
        linear(f"{name}.v", kv_dim, d)
        linear(f"{name}.out", d, q_dim)

    conv2("conv_in", cfg.in_channels, w0)
    block("down0", w0, w0)
    conv2("down_sample", w0, w1)
    block("down1", w1, w1)
    attn("attn_time", w1, w1)
    attn("attn_cross", w1, d)
    block("mid", w1, w1)
    block("up1", w1, w1)
    conv2("up_sample", w1, w0)
    block("up0", w0, w0)
    p.add("head.gn.g", np.ones(w0, dtype=np.float32))
    p.add("head.gn.b", np.zeros(w0, dtype=np.float32))
    linear("head.emb_t", e, 2 * w0)
    linear("head.emb_fps", e, 2 * w0)
    if zero_head:
        p.add("head.w", np.zeros((3, 3, w0, cfg.channels), dtype=np.float32))
    else:
        p.add("head.w", _he(rng, (3, 3, w0, cfg.channels), w0 * 9))
    p.add("head.b", np.zeros(cfg.channels, dtype=np.float32))
    conv2("prompt.c0", cfg.channels + 1, w0)
    conv2("prompt.c1", w0, d)
    return p


def _spatial(x5, fn):
    """Apply an (N, H, W, C) -> (N, OH, OW, C') op across (B, F)."""
    b, f, h, w, c = x5.data.shape
    y = fn(tc.reshape(x5, (b * f, h, w, c)))
    _, oh, ow, oc = y.data.shape
    return tc.reshape(y, (b, f, oh, ow, oc))


def _film(p, name, emb_t, emb_fps, channels):
    """Per-clip (scale, shift) modulation from the step and rate embeddings."""
    mod_t = tc.add(tc.matmul(emb_t, p[f"{name}.emb_t.w"]), p[f"{name}.emb_t.b"])
    mod_f = tc.add(tc.matmul(emb_fps, p[f"{name}.emb_fps.w"]), p[f"{name}.emb_fps.b"])
    mod = tc.reshape(tc.add(mod_t, mod_f), (-1, 1, 1, 1, 2 * channels))
    return (tc.slice_last(mod, 0, channels),
            tc.slice_last(mod, channels, 2 * channels))


def _block(p, name, x, emb_t, emb_fps, groups):
    cin = x.data.shape[-1]
    h = tc.group_norm(x, p[f"{name}.gn.g"], p[f"{name}.gn.b"], groups)
    scale, shift = _film(p, name, emb_t, emb_fps, cin)
    h = tc.add(tc.mul(h, tc.add(scale, 1.0)), shift)
    h = tc.silu(h)
    h = _spatial(h, lambda v: tc.conv2d(v, p[f"{name}.spatial.w"], p[f"{name}.spatial.b"]))
    h = tc.conv1d_time(h, p[f"{name}.temporal.w"], p[f"{name}.temporal.b"])
    cout = h.data.shape[-1]
    if cin != cout:
        x = _spatial(x, lambda v: tc.conv2d(v, p[f"{name}.skip.w"], p[f"{name}.skip.b"]))
    return tc.add(h, x)


def _linear(p, name, x):
    return tc.add(tc.matmul(x, p[f"{name}.w"]), p[f"{name}.b"])


def _attn_time(p, x, groups):
    # self-attention across the frame axis, one head, per spatial site
    b, f, hh, ww, c = x.data.shape
    h = tc.group_norm(x, p["attn_time.gn.g"], p["attn_time.gn.b"], groups)
    h = tc.transpose(h, (0, 2, 3, 1, 4))
    h = tc.reshape(h, (b * hh * ww, f, c))
    q = _linear(p, "attn_time.q", h)
    k = tc.matmul(h, p["attn_time.k.w"])
    v = _linear(p, "attn_time.v", h)
    o = _linear(p, "attn_time.out", tc.attention(q, k, v))
    o = tc.reshape(o, (b, hh, ww, f, c))
    o = tc.transpose(o, (0, 3, 1, 2, 4))
    return tc.add(x, o)


def _attn_cross(p, x, tokens, groups):
    # queries from every (frame, site); keys/values from the prompt tokens
    b, f, hh, ww, c = x.data.shape
    h = tc.group_norm(x, p["attn_cross.gn.g"], p["attn_cross.gn.b"], groups)
    h = tc.reshape(h, (b, f * hh * ww, c))
    q = _linear(p, "attn_cross.q", h)
    k = tc.matmul(tokens, p["attn_cross.k.w"])
    v = _linear(p, "attn_cross.v", tokens)
    o = _linear(p, "attn_cross.out", tc.attention(q, k, v))
    return tc.add(x, tc.reshape(o, (b, f, hh, ww, c)))


def encode_prompt_batch(params, cfg, global_prompts):
    """(B, g, C+1, H, W) masked global frames -> (B, tokens, d) features."""
    gp = np.asarray(global_prompts, dtype=np.float32)
    want = (cfg.global_frames, cfg.channels + 1, cfg.size, cfg.size)
    if gp.ndim != 5 or gp.shape[1:] != want:
        raise ValueError(f"global prompt shape {gp.shape}, expected (B,) + {want}")
    b = gp.shape[0]
    x = tc.tensor(np.ascontiguousarray(gp.transpose(0, 1, 3, 4, 2)))
    x = tc.reshape(x, (b * cfg.global_frames, cfg.size, cfg.size, cfg.channels + 1))
    x = tc.silu(tc.conv2d(x, params["prompt.c0.w"], params["prompt.c0.b"], stride=2))
    x = tc.silu(tc.conv2d(x, params["prompt.c1.w"], params["prompt.c1.b"], stride=2))
    _, hh, ww, d = x.data.shape
    return tc.reshape(x, (b, cfg.global_frames * hh * ww, d))


def encode_prompt(params, cfg, global_prompt):
    """Masked global frames (g, C+1, H, W) -> prompt tokens (g*(H/4)*(W/4), d)."""
    gp = np.asarray(global_prompt, dtype=np.float32)
    tokens = encode_prompt_batch(params, cfg, gp[None])
    return tc.reshape(tokens, tokens.data.shape[1:])


def predict_noise_batch(params, cfg, conds, ts, prompt_tokens):
    """Noise estimates for a batch of clips in one pass.

    conds: list of ClipConditioning; ts: per-clip steps; prompt_tokens:
    (B, tokens, d) tensor.  Returns a (B, F, C, H, W) tensor.
    """
    b = len(conds)
    if len(ts) != b or prompt_tokens.data.shape[0] != b:
        raise ValueError("batch sizes of conds, ts, prompt_tokens differ")
    if prompt_tokens.data.shape[1:] != (cfg.prompt_tokens, cfg.token_dim):
        raise ValueError(
            f"prompt tokens shape {prompt_tokens.data.shape[1:]}, "
            f"expected {(cfg.prompt_tokens, cfg.token_dim)}")
    want = (cfg.frames, cfg.in_channels, cfg.size, cfg.size)
    net_in = np.stack([c.network_input() for c in conds])
    if net_in.shape[1:] != want:
        raise ValueError(f"network input shape {net_in.shape[1:]}, expected {want}")
    x = tc.tensor(np.ascontiguousarray(net_in.transpose(0, 1, 3, 4, 2)))
    emb_t = tc.concat([tc.sinusoidal_embedding(t, cfg.emb_dim) for t in ts], axis=0)
    emb_fps = tc.concat(
        [tc.sinusoidal_embedding(c.fps, cfg.emb_dim) for c in conds], axis=0)
    g = cfg.groups

    x = _spatial(x, lambda v: tc.conv2d(v, params["conv_in.w"], params["conv_in.b"]))
    d0 = _block(params, "down0", x, emb_t, emb_fps, g)
    x = _spatial(d0, lambda v: tc.conv2d(v, params["down_sample.w"],
                                         params["down_sample.b"], stride=2))
    d1 = _block(params, "down1", x, emb_t, emb_fps, g)
    x = _attn_time(params, d1, g)
    x = _attn_cross(params, x, prompt_tokens, g)
    x = _block(params, "mid", x, emb_t, emb_fps, g)
    x = _block(params, "up1", tc.add(x, d1), emb_t, emb_fps, g)
    x = _spatial(x, lambda v: tc.upsample2x(
        tc.conv2d(v, params["up_sample.w"], params["up_sample.b"])))
    x = _block(params, "up0", tc.add(x, d0), emb_t, emb_fps, g)
    x = tc.group_norm(x, params["head.gn.g"], params["head.gn.b"], g)
    scale, shift = _film(params, "head", emb_t, emb_fps, x.data.shape[-1])
    x = tc.silu(tc.add(tc.mul(x, tc.add(scale, 1.0)), shift))
    x = _spatial(x, lambda v: tc.conv2d(v, params["head.w"], params["head.b"]))
    return tc.transpose(x, (0, 1, 4, 2, 3))


def predict_noise(params, cfg, cond, t, prompt_tokens):
    """Noise estimate for one clip at step t; returns a (F, C, H, W) tensor."""
    if prompt_tokens.data.ndim == 2:
        prompt_tokens = tc.reshape(prompt_tokens, (1,) + prompt_tokens.data.shape)
    out = predict_noise_batch(params, cfg, [cond], [t], prompt_tokens)
    return tc.reshape(out, out.data.shape[1:])
