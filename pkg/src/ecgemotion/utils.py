"""Seed derivation and text formatting helpers shared across the pipeline."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, *tags) -> int:
    """Derive a child seed from a master seed and a tag path.

    All randomness in the pipeline flows from one master seed through this
    function, so any stage can be re-run in isolation and reproduce its
    stream exactly. SHA-256 keeps the mapping stable across platforms.
    """
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for tag in tags:
        h.update(b"/")
        h.update(str(tag).encode())
    return int.from_bytes(h.digest()[:8], "little")


def rng_from(master: int, *tags) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *tags))


def fmt_float(x: float) -> str:
    """Shortest decimal text that round-trips the exact float64 value."""
    return repr(float(x))


def fmt_percent(rate: float) -> str:
    """Render a rate in [0, 1] the way the report tables print it.

    0.9251 -> '92.51%', 0.983 -> '98.3%', 1.0 -> '100%'.
    """
    return f"{round(rate * 100, 2):g}%"
