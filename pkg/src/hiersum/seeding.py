"""Named RNG substreams so every run is reproducible from one master seed."""

import hashlib

import numpy as np


def substream(seed, *names):
    """Return an independent ``numpy`` generator keyed by (seed, *names).

    Stream identity depends only on the seed and the name strings, not on
    call order, so per-video work can run in parallel without changing what
    any stream produces.
    """
    keys = [
        int.from_bytes(
            hashlib.blake2s(str(name).encode("utf-8"), digest_size=4).digest(), "little"
        )
        for name in names
    ]
    return np.random.default_rng([int(seed), *keys])
