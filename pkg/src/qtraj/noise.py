"""Deterministic random streams.

Every consumer draws from a Philox (counter-based) generator keyed by the
master seed and a stream key, so results do not depend on the order in which
trajectories are processed or on how they are batched across workers.
"""

import numpy as np

TRAJECTORY_STREAM = 0
MH_STREAM = 1


def substream(seed: int, *key: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def wiener_increments(seed: int, trajectory: int, n_steps: int, dt: float) -> np.ndarray:
    """Increments of trajectory ``trajectory``: i.i.d. N(0, dt), element k is step k."""
    rng = substream(seed, TRAJECTORY_STREAM, trajectory)
    return rng.standard_normal(n_steps) * np.sqrt(dt)


def mh_stream(seed: int) -> np.random.Generator:
    return substream(seed, MH_STREAM)
