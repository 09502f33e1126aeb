"""Deterministic seed derivation for reproducible sweeps.

Python's builtin hash() is salted per process, so derived seeds go through
blake2b instead. Any run with the same master seed and the same coordinate
strings gets the same sub-seed, on any platform.
"""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *parts: object) -> int:
    """Derive a 64-bit sub-seed from a master seed and coordinate parts."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master)).encode())
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode())
    return int.from_bytes(h.digest(), "big")
