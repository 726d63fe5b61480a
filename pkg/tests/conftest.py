"""Shared fixtures.

The trained toy model is expensive (2,000 optimizer steps on one core),
so it is built once per session and shared by the training-curve checks,
the end-to-end acceptance experiment, and everything else that needs a
model that actually learned something.
"""

import numpy as np
import pytest

from vidpaint import DenoiserConfig, SyntheticSpec, TrainConfig, gen_corpus
from vidpaint.training import train

TOY_SEED = 0
HOLDOUT_SEED = 7777


def toy_spec(seed):
    return SyntheticSpec(motif="moving-square", length=32, height=16, width=16,
                         channels=1, speed=1.0, amplitude=0.8, seed=seed)


@pytest.fixture(scope="session")
def train_corpus():
    return gen_corpus(toy_spec(TOY_SEED), 64)


@pytest.fixture(scope="session")
def holdout_corpus():
    return gen_corpus(toy_spec(HOLDOUT_SEED), 16)


@pytest.fixture(scope="session")
def toy_cfg():
    return DenoiserConfig()


@pytest.fixture(scope="session")
def trained_model(train_corpus, toy_cfg):
    """(params, losses) from the full 2,000-step toy training run.

    Warmup and learning rate are adapted to the toy budget; the
    optimizer defaults stay at the reference values (1e-4, 1k ramp).
    """
    tcfg = TrainConfig(steps=2000, batch_size=8, lr=2e-4, warmup=200, seed=TOY_SEED)
    return train(train_corpus, toy_cfg, tcfg)
