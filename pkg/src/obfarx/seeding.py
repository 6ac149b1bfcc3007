"""Deterministic RNG stream splitting.

Every stochastic component draws from its own substream, keyed by
``(base_seed, *path)`` where the path entries are small integer tags.
Two runs with the same base seed therefore produce bit-identical noise
regardless of how many other streams are consumed in between, and
experiments can run in parallel without sharing generator state.

Stream tags used across the package:

=====================  ====
process noise w(t)     0
measurement noise v(t) 1
controller state noise 2
controller output noise 3
initial state draw     4
combined closed-loop noise 5
diffusion-constant draw 6
=====================  ====
"""

import numpy as np

STREAM_PROCESS = 0
STREAM_MEASUREMENT = 1
STREAM_CONTROLLER_STATE = 2
STREAM_CONTROLLER_OUTPUT = 3
STREAM_INITIAL_STATE = 4
STREAM_CLOSED_LOOP = 5
STREAM_PLANT_PARAMS = 6


def substream(seed, *path):
    """Return a `numpy.random.Generator` for the given seed and stream path."""
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(p) for p in path)))
