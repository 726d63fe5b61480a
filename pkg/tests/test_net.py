"""Denoiser network: shape contracts, conditioning sensitivity, temporal
and cross-attention reach, and gradients on a miniature configuration."""

import numpy as np
import pytest

from vidpaint import tensor as tc
from vidpaint.masks import FrameRole, assemble_conditioning, make_rect_mask
from vidpaint.net import (DenoiserConfig, config_from_header, config_header,
                          encode_prompt, encode_prompt_batch, init_denoiser,
                          predict_noise, predict_noise_batch)

MINI = DenoiserConfig(frames=3, size=4, channels=1, widths=(4, 6), token_dim=8,
                      heads=1, global_frames=2, emb_dim=8, groups=2)


def make_cond(cfg, rng, ratio=0.5, guide_first=False, fps=2):
    frames = rng.random((cfg.frames, cfg.channels, cfg.size, cfg.size)).astype(np.float32)
    roles = [FrameRole.CONTEXT_ONLY] * cfg.frames
    if guide_first:
        roles[0] = FrameRole.GUIDE_RAW
    mask = make_rect_mask(cfg.size, cfg.size, "single", ratio, ("left",)).mask
    gf = rng.random((cfg.global_frames, cfg.channels, cfg.size, cfg.size)).astype(np.float32)
    noisy = rng.standard_normal(frames.shape).astype(np.float32)
    return assemble_conditioning(list(frames), roles, mask, gf, fps=fps, noisy=noisy)


@pytest.fixture(scope="module")
def mini_setup():
    rng = np.random.default_rng(0)
    params = init_denoiser(MINI, rng, zero_head=False)
    cond = make_cond(MINI, rng)
    tokens = encode_prompt(params, MINI, cond.global_prompt)
    return params, cond, tokens


class TestShapes:
    def test_output_shape_matches_clip(self, mini_setup):
        params, cond, tokens = mini_setup
        out = predict_noise(params, MINI, cond, 3, tokens)
        assert out.data.shape == (MINI.frames, MINI.channels, MINI.size, MINI.size)

    def test_prompt_token_count_default_config(self):
        # g frames, two stride-2 halvings: 16 * 4 * 4 tokens
        cfg = DenoiserConfig()
        assert cfg.prompt_tokens == 16 * 4 * 4 == 256
        rng = np.random.default_rng(1)
        params = init_denoiser(cfg, rng)
        gp = rng.random((cfg.global_frames, cfg.channels + 1, cfg.size,
                         cfg.size)).astype(np.float32)
        tokens = encode_prompt(params, cfg, gp)
        assert tokens.data.shape == (256, cfg.token_dim)

    def test_wrong_global_frame_count_rejected(self, mini_setup):
        params, _, _ = mini_setup
        bad = np.zeros((MINI.global_frames + 1, MINI.channels + 1, MINI.size,
                        MINI.size), dtype=np.float32)
        with pytest.raises(ValueError, match="global prompt"):
            encode_prompt(params, MINI, bad)

    def test_wrong_clip_shape_rejected(self, mini_setup):
        import dataclasses
        params, cond, tokens = mini_setup
        bad = dataclasses.replace(cond, noisy=cond.noisy[:, :, :2, :],
                                  context=cond.context[:, :, :2, :],
                                  mask=cond.mask[:, :, :2, :])
        with pytest.raises(ValueError, match="network input"):
            predict_noise(params, MINI, bad, 3, tokens)

    def test_batch_matches_single(self, mini_setup):
        params, cond, tokens = mini_setup
        single = predict_noise(params, MINI, cond, 3, tokens).data
        tokens2 = tc.tensor(np.stack([tokens.data, tokens.data]))
        batch = predict_noise_batch(params, MINI, [cond, cond], [3, 3], tokens2).data
        assert batch.shape[0] == 2
        assert np.allclose(batch[0], single, atol=1e-5)
        assert np.allclose(batch[1], single, atol=1e-5)

    def test_config_header_round_trip(self):
        cfg = DenoiserConfig()
        header = {k: str(v) for k, v in config_header(cfg).items()}
        assert config_from_header(header) == cfg

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            DenoiserConfig(frames=1)
        with pytest.raises(ValueError):
            DenoiserConfig(size=10)
        with pytest.raises(ValueError):
            DenoiserConfig(widths=(15, 32))  # groups do not divide


class TestSensitivity:
    def test_null_prompt_is_deterministic(self, mini_setup):
        params, cond, _ = mini_setup
        null = np.zeros_like(cond.global_prompt)
        a = encode_prompt(params, MINI, null).data
        b = encode_prompt(params, MINI, null).data
        assert a.tobytes() == b.tobytes()

    def test_prompt_encoder_sees_visible_pixels(self, mini_setup):
        params, cond, _ = mini_setup
        gp = cond.global_prompt.copy()
        base = encode_prompt(params, MINI, gp).data
        vis = np.argwhere(gp[0, -1] > 0)[0]
        gp2 = gp.copy()
        gp2[0, 0, vis[0], vis[1]] += 0.25
        changed = encode_prompt(params, MINI, gp2).data
        assert not np.array_equal(base, changed)

    def test_fps_embedding_is_wired(self, mini_setup):
        params, cond, tokens = mini_setup
        import dataclasses
        out1 = predict_noise(params, MINI, dataclasses.replace(cond, fps=1), 3,
                             tokens).data
        out30 = predict_noise(params, MINI, dataclasses.replace(cond, fps=30), 3,
                              tokens).data
        assert not np.array_equal(out1, out30)

    def test_step_embedding_is_wired(self, mini_setup):
        params, cond, tokens = mini_setup
        a = predict_noise(params, MINI, cond, 1, tokens).data
        b = predict_noise(params, MINI, cond, 900, tokens).data
        assert not np.array_equal(a, b)

    def test_temporal_reach_first_to_last_frame(self, mini_setup):
        # context change in frame 0 must reach the estimate at frame F-1
        params, cond, tokens = mini_setup
        base = predict_noise(params, MINI, cond, 3, tokens).data
        ctx = cond.context.copy()
        vis = np.argwhere(cond.mask[0, 0] > 0)[0]
        ctx[0, 0, vis[0], vis[1]] += 0.5
        import dataclasses
        cond2 = dataclasses.replace(cond, context=ctx)
        out = predict_noise(params, MINI, cond2, 3, tokens).data
        assert not np.array_equal(base[-1], out[-1])

    def test_cross_attention_reach(self, mini_setup):
        # a visible global-prompt pixel influences the noise estimate
        params, cond, tokens = mini_setup
        base = predict_noise(params, MINI, cond, 3, tokens).data
        gp = cond.global_prompt.copy()
        vis = np.argwhere(gp[0, -1] > 0)[0]
        gp[0, 0, vis[0], vis[1]] += 0.5
        tokens2 = encode_prompt(params, MINI, gp)
        out = predict_noise(params, MINI, cond, 3, tokens2).data
        assert not np.array_equal(base, out)

    def test_deterministic_given_params_and_inputs(self, mini_setup):
        params, cond, tokens = mini_setup
        a = predict_noise(params, MINI, cond, 5, tokens).data
        b = predict_noise(params, MINI, cond, 5, tokens).data
        assert a.tobytes() == b.tobytes()


class TestGradients:
    def test_every_parameter_group_is_live(self, mini_setup):
        # mean output must have nonzero gradient into every parameter tensor
        params, cond, _ = mini_setup
        params.zero_grads()
        with tc.Tape() as tape:
            tokens = encode_prompt(params, MINI, cond.global_prompt)
            out = predict_noise(params, MINI, cond, 3, tokens)
            loss = tc.mean_all(tc.mul(out, out))
        tc.backward(loss, params=params)
        dead = [name for name, t in params.items()
                if float(np.abs(t.grad).max()) == 0.0]
        assert dead == [], f"dead parameter groups: {dead}"

    def test_full_net_matches_finite_differences(self, mini_setup):
        # a random coordinate subset of every parameter tensor, 64-bit check
        params32, cond, _ = mini_setup
        rng = np.random.default_rng(2)
        params = tc.ParamStore()
        for name, t in params32.items():
            params.add(name, t.data.astype(np.float64), dtype=np.float64)

        def loss_fn():
            tokens = encode_prompt(params, MINI, cond.global_prompt.astype(np.float64))
            out = predict_noise(params, MINI, cond, 3, tokens)
            return tc.mean_all(tc.mul(out, out))

        params.zero_grads()
        with tc.Tape() as tape:
            loss = loss_fn()
        tc.backward(loss, params=params)
        worst = 0.0
        h = 1e-6
        for name, t in params.items():
            flat = t.data.reshape(-1)
            gflat = t.grad.reshape(-1)
            idx = rng.choice(flat.size, size=min(3, flat.size), replace=False)
            denom = max(float(np.abs(gflat).max()), 1.0)
            for i in idx:
                orig = flat[i]
                step = h * max(1.0, abs(orig))
                flat[i] = orig + step
                fp = float(loss_fn().data)
                flat[i] = orig - step
                fm = float(loss_fn().data)
                flat[i] = orig
                fd = (fp - fm) / (2 * step)
                worst = max(worst, abs(gflat[i] - fd) / denom)
        assert worst <= 1e-4, f"relative error {worst}"
