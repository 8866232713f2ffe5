"""Canonical serialization shared by signatures, hashes, and wire messages.

Every signed or hashed structure in UDSS is serialized the same way:
key-sorted, whitespace-free JSON encoded as UTF-8. Two processes that
agree on the value agree on the bytes, which is what keeps signatures
and hash chains stable across implementations.
"""

import json
from typing import Any


def canonical_json(value: Any) -> str:
    """Key-sorted, separator-free JSON string for *value*."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def canonical_bytes(value: Any) -> bytes:
    """UTF-8 bytes of the canonical JSON form of *value*."""
    return canonical_json(value).encode("utf-8")
