"""Synthetic corpus generation, binary formats, and quality metrics
against direct-formula oracles."""

import math

import numpy as np
import pytest

from vidpaint.corpus import (SyntheticSpec, corpus_file_size, gen_corpus,
                             generate_video, read_corpus, read_pgm,
                             write_corpus, write_frames, write_pgm, write_ppm)
from vidpaint.metrics import (MetricsRecord, evaluate, frame_ssim, jitter_ratio,
                              metrics_csv, mse, psnr_from_mse, ssim)


class TestSyntheticVideos:
    def test_square_moves_by_exactly_its_velocity(self):
        spec = SyntheticSpec(motif="moving-square", length=8, seed=3)
        video = generate_video(spec, 0)
        # locate the square per frame by thresholding against the background
        centers = []
        for f in (0, 1):
            img = video.frames[f, 0]
            ys, xs = np.where(img > img.min() + 0.3)
            centers.append((ys.mean(), xs.mean()))
        dy = centers[1][0] - centers[0][0]
        dx = centers[1][1] - centers[0][1]
        assert (abs(dx), abs(dy)) != (0.0, 0.0)
        assert float(dx) == int(dx) and float(dy) == int(dy)

    def test_values_in_unit_range_all_motifs(self):
        for motif in ("moving-square", "moving-gradient", "panning-texture"):
            video = generate_video(SyntheticSpec(motif=motif, seed=1), 0)
            assert video.frames.min() >= 0.0
            assert video.frames.max() <= 1.0

    def test_determinism(self):
        spec = SyntheticSpec(seed=5)
        a = generate_video(spec, 3)
        b = generate_video(spec, 3)
        assert a.frames.tobytes() == b.frames.tobytes()
        assert generate_video(spec, 4).frames.tobytes() != a.frames.tobytes()

    def test_unknown_motif_rejected(self):
        with pytest.raises(ValueError, match="motif"):
            SyntheticSpec(motif="bouncing-ball")


class TestCorpusFormat:
    def test_round_trip_bit_exact(self, tmp_path):
        videos = gen_corpus(SyntheticSpec(length=12, seed=2), 5)
        path = tmp_path / "c.m3dv"
        write_corpus(path, videos)
        loaded = read_corpus(path)
        assert len(loaded) == 5
        for a, b in zip(videos, loaded):
            assert a.fps == b.fps
            assert a.frames.tobytes() == b.frames.tobytes()
        path2 = tmp_path / "c2.m3dv"
        write_corpus(path2, loaded)
        assert path.read_bytes() == path2.read_bytes()

    def test_same_seed_byte_identical_files(self, tmp_path):
        for name in ("a.m3dv", "b.m3dv"):
            write_corpus(tmp_path / name, gen_corpus(SyntheticSpec(seed=9), 4))
        assert (tmp_path / "a.m3dv").read_bytes() == (tmp_path / "b.m3dv").read_bytes()

    def test_file_size_formula(self, tmp_path):
        videos = gen_corpus(SyntheticSpec(length=32, height=16, width=16,
                                          channels=1, seed=0), 64)
        path = tmp_path / "c.m3dv"
        write_corpus(path, videos)
        expected = 12 + 64 * (20 + 4 * 32 * 16 * 16 * 1)
        assert corpus_file_size(videos) == expected
        assert path.stat().st_size == expected

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "bad.m3dv"
        p.write_bytes(b"XXXX" + b"\x00" * 8)
        with pytest.raises(ValueError, match="not a corpus"):
            read_corpus(p)


class TestFrameFiles:
    def test_pgm_round_trip(self, tmp_path):
        img = np.linspace(0, 1, 64, dtype=np.float64).reshape(8, 8)
        p = tmp_path / "x.pgm"
        write_pgm(p, img)
        back = read_pgm(p)
        assert back.shape == (8, 8)
        assert np.abs(back - img).max() <= 1 / 255 + 1e-6

    def test_write_frames_extension_by_channels(self, tmp_path):
        gray = np.random.default_rng(0).random((3, 1, 8, 8))
        paths = write_frames(tmp_path / "g", gray)
        assert all(p.endswith(".pgm") for p in paths)
        rgb = np.random.default_rng(1).random((2, 3, 8, 8))
        paths = write_frames(tmp_path / "c", rgb)
        assert all(p.endswith(".ppm") for p in paths)


def direct_ssim(a, b, win=11, k1=0.01, k2=0.03):
    """Direct-formula SSIM: explicit loop over window positions."""
    h, w = a.shape
    vals = []
    for i in range(h - win + 1):
        for j in range(w - win + 1):
            pa = a[i:i + win, j:j + win].astype(np.float64)
            pb = b[i:i + win, j:j + win].astype(np.float64)
            mu_a, mu_b = pa.mean(), pb.mean()
            va, vb = pa.var(), pb.var()
            cov = ((pa - mu_a) * (pb - mu_b)).mean()
            c1, c2 = k1 ** 2, k2 ** 2
            vals.append(((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                        / ((mu_a ** 2 + mu_b ** 2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


class TestMetrics:
    def test_psnr_of_hundredth_is_twenty(self):
        assert psnr_from_mse(0.01) == pytest.approx(20.0, abs=1e-12)

    def test_psnr_of_zero_is_infinite(self):
        assert psnr_from_mse(0.0) == math.inf

    def test_identity_record(self):
        rng = np.random.default_rng(4)
        x = rng.random((6, 1, 16, 16)).astype(np.float32)
        mask = np.zeros((16, 16), dtype=bool)
        mask[:, 8:] = True
        rec = evaluate(x, x, mask, region="hidden")
        assert rec.mse == 0.0
        assert rec.psnr == math.inf
        assert rec.ssim == pytest.approx(1.0, abs=1e-12)
        assert rec.jitter_ratio == 1.0

    def test_ssim_symmetry(self):
        rng = np.random.default_rng(5)
        a = rng.random((2, 1, 16, 16))
        b = rng.random((2, 1, 16, 16))
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_ssim_matches_direct_formula_oracle(self):
        rng = np.random.default_rng(6)
        a = rng.random((16, 16))
        b = np.clip(a + 0.1 * rng.standard_normal((16, 16)), 0, 1)
        assert frame_ssim(a, b) == pytest.approx(direct_ssim(a, b), abs=1e-6)

    def test_mse_region_selection(self):
        a = np.zeros((2, 1, 4, 4))
        b = np.zeros((2, 1, 4, 4))
        b[..., :, :2] = 1.0  # error only in the left half
        left = np.zeros((4, 4), dtype=bool)
        left[:, :2] = True
        assert mse(a, b, left) == 1.0
        assert mse(a, b, ~left) == 0.0
        assert mse(a, b) == 0.5

    def test_empty_hidden_region_reported_absent(self):
        x = np.random.default_rng(7).random((3, 1, 16, 16))
        rec = evaluate(x, x, np.ones((16, 16), dtype=bool), region="hidden")
        assert rec.mse is None and rec.psnr is None
        assert rec.jitter_ratio is None
        assert rec.ssim == pytest.approx(1.0)

    def test_jitter_ratio_detects_flicker(self):
        rng = np.random.default_rng(8)
        truth = np.repeat(rng.random((1, 1, 8, 8)), 6, axis=0)
        truth = truth + np.linspace(0, 0.1, 6)[:, None, None, None]
        jittery = truth.copy()
        jittery[::2] += 0.2
        hidden = np.ones((8, 8), dtype=bool)
        assert jitter_ratio(jittery, truth, hidden) > 1.0

    def test_metrics_csv_layout(self):
        rec = MetricsRecord(mse=0.01, psnr=20.0, ssim=0.9, jitter_ratio=None,
                            region="hidden")
        text = metrics_csv([("clip0", rec)])
        lines = text.splitlines()
        assert lines[0] == "label,region,mse,psnr,ssim,jitter_ratio"
        assert lines[1] == "clip0,hidden,0.01,20.0,0.9,"

    def test_psnr_mse_relation_on_random_pairs(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            a = rng.random((2, 1, 16, 16))
            b = rng.random((2, 1, 16, 16))
            m = mse(a, b)
            assert psnr_from_mse(m) == pytest.approx(-10 * math.log10(m))
