"""Named, independent random substreams derived from a single 64-bit seed.

Every consumer asks for its own stream, so adding draws in one place never
shifts the numbers another component sees.
"""
import numpy as np

STREAMS = {
    "graph": 1,
    "function": 2,
    "plan": 3,
    "propagation": 4,
    "mutation": 5,
    "noise": 6,
}


def substream(seed: int, name: str, *ids: int) -> np.random.Generator:
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    key = (STREAMS[name],) + tuple(int(i) for i in ids)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))
