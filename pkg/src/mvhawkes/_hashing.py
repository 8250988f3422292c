"""Canonical hashing of parameter dictionaries for caching and provenance."""

from __future__ import annotations

import hashlib
import json


def _canonical(obj):
    if isinstance(obj, float):
        return float.hex(obj)
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    return obj


def params_hash(payload: dict) -> str:
    """Stable sha256 of a nested dict; floats hashed by exact bit pattern."""
    text = json.dumps(_canonical(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()
