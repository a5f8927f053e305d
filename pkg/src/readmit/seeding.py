"""Deterministic sub-seed derivation.

A single master seed fans out to independent component seeds through
stable text labels, so any stage can be reproduced in isolation.
"""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *labels: object) -> int:
    """Derive a child seed from ``master`` and a stable label path.

    The same (master, labels) always yields the same value, on every
    platform. Distinct label paths give independent streams.
    """
    key = ":".join([str(int(master))] + [str(l) for l in labels])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
