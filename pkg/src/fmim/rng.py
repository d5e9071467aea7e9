"""Labelled sub-streams derived from one global seed."""

import zlib

import numpy as np


def derive_rng(seed: int, label: str) -> np.random.Generator:
    """Independent generator for ``label`` (e.g. ``"init"``, ``"batches"``).

    Streams depend only on ``(seed, label)``, so adding a new consumer never
    shifts the numbers another component sees.
    """
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(label.encode())])
