"""Small shared helpers: stable hashing for seed derivation."""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1


def stable_hash64(*parts: object) -> int:
    """Deterministic 64-bit hash of a tuple of ints/strings.

    Unlike ``hash()``, the value is stable across processes and Python
    versions, so seeds derived from it never depend on interpreter state
    or evaluation order.
    """
    h = hashlib.sha256()
    for part in parts:
        token = f"{type(part).__name__}:{part}"
        h.update(token.encode("utf-8"))
        h.update(b"\x00")
    return int.from_bytes(h.digest()[:8], "big") & _MASK64


def derive_seed(*parts: object) -> int:
    """Seed for ``numpy.random.default_rng`` derived from labeled parts."""
    return stable_hash64(*parts)
