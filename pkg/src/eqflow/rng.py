"""Deterministic random-stream management.

Every piece of randomness in the package flows from a single 64-bit seed.
Sub-tasks get independent substreams keyed by string labels, so adding,
removing or reordering sub-tasks never perturbs the streams of the others.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_entropy(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(seed: int, *labels: str) -> np.random.Generator:
    """Generator for the substream of ``seed`` addressed by ``labels``.

    The same (seed, labels) pair always yields the same stream, on every
    platform, independent of how many other substreams were drawn before.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    entropy.extend(_label_entropy(lab) for lab in labels)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
