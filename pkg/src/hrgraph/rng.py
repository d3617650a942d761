"""Seeding scheme.

Every random stream is a ``numpy.random.Generator`` backed by PCG64 and
seeded from ``SeedSequence([seed, *key])``. ``key`` names the stream, e.g.
``(METHOD_ID, fraction_index, trial_index)``; string parts are mapped to
integers with CRC-32 so keys are stable across processes and Python versions.
"""

import zlib

import numpy as np

SCHEME = "pcg64-seedsequence-v1"


def _part(x):
    if isinstance(x, str):
        return zlib.crc32(x.encode("utf-8"))
    return int(x)


def seed_sequence(seed, *key):
    return np.random.SeedSequence([_part(seed), *(_part(k) for k in key)])


def make_rng(seed, *key):
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *key)))


def derive_seed(seed, *key):
    """A plain 63-bit integer seed for the named sub-stream."""
    return int(seed_sequence(seed, *key).generate_state(2, np.uint64)[0] >> np.uint64(1))
