"""Seed derivation.

Every random draw in the package comes from a generator keyed by
``(master_seed, stream, *indices)`` so that layers, resimulations and
evaluations never share a stream and runs are reproducible.
"""
import numpy as np

TRAIN = 1
RESIM = 2
EVAL = 3
INNER_MC = 4
FIT = 5

_STREAM_NAMES = {
    "train": TRAIN,
    "perf-resim": RESIM,
    "eval": EVAL,
    "inner-mc": INNER_MC,
    "fit": FIT,
}


def stream_key(stream, *indices):
    if isinstance(stream, str):
        stream = _STREAM_NAMES[stream]
    return (int(stream),) + tuple(int(i) for i in indices)


def generator(master_seed, stream, *indices):
    """Return a fresh ``numpy.random.Generator`` for one derived stream."""
    if master_seed is None:
        raise ValueError("a master seed is mandatory")
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=stream_key(stream, *indices))
    return np.random.Generator(np.random.PCG64(ss))
