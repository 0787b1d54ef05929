"""Small shared helpers: canonical serialization, stable hashing, time handling."""

from __future__ import annotations

import hashlib
import json
from datetime import date, datetime, timezone

DAY_S = 86400.0


def canonical_json(obj) -> str:
    """Compact JSON with sorted keys; the byte form used for content hashing."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def content_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def unit_hash(*parts) -> float:
    """Deterministic pseudo-random float in [0, 1) keyed by the given parts.

    Order-independent of any RNG stream: the same key always yields the same
    draw, which keeps paired simulation runs aligned (common random numbers).
    """
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2.0**64


def derive_seed(master: int, *tags) -> int:
    """Stable 64-bit child seed for a named random stream."""
    key = "\x1f".join([str(master), *map(str, tags)]).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")


def date_to_ts(d: date) -> float:
    """UTC midnight of a calendar date, as seconds since the epoch."""
    return datetime(d.year, d.month, d.day, tzinfo=timezone.utc).timestamp()


def parse_date(s: str) -> date:
    return date.fromisoformat(s)


def parse_time(s: str) -> float:
    """ISO-8601 timestamp (UTC assumed when no offset given) to epoch seconds."""
    dt = datetime.fromisoformat(s.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def format_time(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()
