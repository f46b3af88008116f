"""Seeded random streams.

Every run seed feeds a :class:`numpy.random.SeedSequence` which is split into
independent child streams by purpose, always in this order:

0. ``prior``  -- unit-hypercube candidates for the sampler
1. ``labels`` -- tie-breaking labels drawn by :func:`~plateau_ns.samplers.tie_break_wrap`
2. ``errors`` -- compression sequences for evidence error simulation

Each child drives a PCG64 generator, whose output stream is fixed across
platforms. Ensemble member ``k`` of a repeat with base seed ``s`` uses seed
``s + k``.
"""
import numpy as np

PURPOSES = ("prior", "labels", "errors")


def stream(seed, purpose):
    """Generator for one purpose of a run seed."""
    if purpose not in PURPOSES:
        raise ValueError(f"unknown stream purpose {purpose!r}")
    children = np.random.SeedSequence(int(seed)).spawn(len(PURPOSES))
    return np.random.Generator(np.random.PCG64(children[PURPOSES.index(purpose)]))


def member_seed(base_seed, index):
    return int(base_seed) + int(index)


def as_generator(rng, seed=0, purpose="errors"):
    """Accept a Generator, an int seed or None (falls back to ``seed``)."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return stream(seed, purpose)
    return stream(int(rng), purpose)
