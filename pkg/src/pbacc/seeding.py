"""Deterministic derivation of per-node, per-phase random streams."""

import numpy as np

INPUT_STREAM = 0
MASK_STREAM = 1
DP_STREAM = 2
STRAGGLER_STREAM = 3
MATRIX_STREAM = 4


def derive_seed(master: int, *key: int) -> int:
    """Child seed for a (phase, index, ...) subkey.

    Stable across runs, platforms, and execution order, so every node can draw
    its own stream regardless of scheduling.
    """
    seq = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, np.uint64)[0])
