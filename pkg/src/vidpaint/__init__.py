"""Masked spatiotemporal diffusion for video outpainting, desk scale.

The pieces: a small autodiff tensor core (`tensor`), the noise schedule
and reverse samplers (`schedule`), edge-mask and guide-frame sampling
(`masks`), the factorized spatiotemporal denoiser (`net`), two-condition
guidance and single-clip outpainting (`guidance`), hierarchical
coarse-to-fine planning and execution (`planner`), synthetic corpora and
file formats (`corpus`), quality metrics (`metrics`), the training loop
(`train`), and the command line (`cli`).
"""

from .corpus import SyntheticSpec, Video, gen_corpus, read_corpus, write_corpus
from .guidance import GuidanceConfig, guided_epsilon, outpaint_clip, warm_start
from .masks import (ClipConditioning, FrameRole, MaskSpec, MaskStrategy,
                    assemble_conditioning, make_rect_mask, sample_guide_case,
                    sample_mask)
from .metrics import MetricsRecord, evaluate
from .net import DenoiserConfig, encode_prompt, init_denoiser, predict_noise
from .planner import (CtfPlan, InferenceCall, chain_depth, execute_plan,
                      plan_dense, plan_hybrid, plan_infill_only)
from .schedule import (NoiseSchedule, SamplerConfig, build_schedule,
                       forward_sample, reverse_step, sample_chain,
                       select_timesteps, training_target)
from .tensor import Adam, ParamStore, Tape, Tensor, load_checkpoint, save_checkpoint
from .training import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "SyntheticSpec", "Video", "gen_corpus", "read_corpus", "write_corpus",
    "GuidanceConfig", "guided_epsilon", "outpaint_clip", "warm_start",
    "ClipConditioning", "FrameRole", "MaskSpec", "MaskStrategy",
    "assemble_conditioning", "make_rect_mask", "sample_guide_case", "sample_mask",
    "MetricsRecord", "evaluate",
    "DenoiserConfig", "encode_prompt", "init_denoiser", "predict_noise",
    "CtfPlan", "InferenceCall", "chain_depth", "execute_plan",
    "plan_dense", "plan_hybrid", "plan_infill_only",
    "NoiseSchedule", "SamplerConfig", "build_schedule", "forward_sample",
    "reverse_step", "sample_chain", "select_timesteps", "training_target",
    "Adam", "ParamStore", "Tape", "Tensor", "load_checkpoint", "save_checkpoint",
    "TrainConfig", "train",
    "__version__",
]
