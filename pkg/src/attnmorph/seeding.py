"""Named sub-seeds derived from one run seed."""

import zlib

import numpy as np


def derive_seed(seed, *names):
    """Deterministic 63-bit seed for the stream identified by ``names``.

    ``derive_seed(7, "data")`` and ``derive_seed(7, "init")`` are independent
    streams; each is stable across processes and platforms.
    """
    key = tuple(zlib.crc32(str(n).encode("utf-8")) for n in names)
    state = np.random.SeedSequence(int(seed), spawn_key=key).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def rng_for(seed, *names):
    return np.random.default_rng(derive_seed(seed, *names))
