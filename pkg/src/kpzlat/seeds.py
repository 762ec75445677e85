"""Deterministic, collision-resistant seed derivation for experiment stages."""

import hashlib

import numpy as np

_MASK63 = (1 << 63) - 1


def seed_stream(root: int, *labels) -> int:
    """Derive a child seed from a root seed and a tuple of stage labels.

    The derivation hashes a canonical text encoding of ``(root, labels...)``
    with SHA-256, so it is stable across platforms and Python versions, and
    distinct label tuples yield effectively independent 63-bit seeds.
    """
    text = str(int(root)) + "".join("|" + str(lab) for lab in labels)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & _MASK63


def rng_stream(root: int, *labels) -> np.random.Generator:
    """A ``numpy`` generator seeded from :func:`seed_stream`."""
    return np.random.default_rng(seed_stream(root, *labels))
