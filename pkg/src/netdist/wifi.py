"""Split-trust Wi-Fi co-location matching.

Devices hash the access point identifier they are connected to and talk to a
Matching Entity that is deliberately kept ignorant of device identities. Two
protocol variants are supported:

* ``temp_id``: the matcher maps each hashed fingerprint to a short-lived
  random identifier; the device forwards only that identifier to the main
  server as a normal Wi-Fi detection record.
* ``pair_report``: the device sends a single-use random identifier plus the
  hashed fingerprint to the matcher and separately announces the single-use
  identifier to the main server; at round close the matcher reports which
  single-use identifiers were co-located, and only the main server can map
  them back to devices.

Either way the main server never stores fingerprint-derived data and the
matcher never stores device identifiers; both properties are audited by
scanning the respective stores.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass

from .config import WifiMatcherConfig


def hash_bssid(bssid: str, salt: str) -> str:
    """One-way, salted fingerprint of an access point identifier.

    The salt is distributed to devices out of band and never stored by the
    matcher, so the stored digests cannot be grinded back to hardware ids.
    """
    return hashlib.sha256(f"{salt}|{bssid}".encode("utf-8")).hexdigest()


def fresh_single_use_id() -> str:
    return secrets.token_hex(16)


@dataclass(frozen=True)
class WifiTempId:
    id: str
    issued_at: float
    ttl: float


class DuplicateSingleUseId(ValueError):
    def __init__(self, single_use_id: str):
        self.single_use_id = single_use_id
        super().__init__(f"single-use id submitted twice in one round: {single_use_id}")


def match_round(submissions, epoch_seconds: float) -> set[tuple[str, str]]:
    """All unordered pairs of single-use ids that share a hashed fingerprint
    at around the same time (same epoch bucket). Pure function; equals the
    brute-force all-pairs equality join by construction of the grouping.
    """
    seen: set[str] = set()
    groups: dict[tuple[str, int], list[str]] = {}
    for single_use_id, digest, ts in submissions:
        if single_use_id in seen:
            raise DuplicateSingleUseId(single_use_id)
        seen.add(single_use_id)
        groups.setdefault((digest, int(ts // epoch_seconds)), []).append(single_use_id)
    pairs: set[tuple[str, str]] = set()
    for members in groups.values():
        members.sort()
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                pairs.add((members[i], members[j]))
    return pairs


class WifiMatcher:
    """The Matching Entity. Its storage holds hashed fingerprints, temp-id
    associations and round buffers, all aggressively expired; it never sees
    a device identifier.
    """

    def __init__(self, config: WifiMatcherConfig):
        self.config = config
        # digest -> (epoch index, temp id); replaced wholesale on rotation
        self._temp_ids: dict[str, tuple[int, str]] = {}
        self._round: list[tuple[str, str, float]] = []
        self._round_ids: set[str] = set()
        # closed rounds pending destruction: (destroy_at, submissions)
        self._retained: list[tuple[float, list[tuple[str, str, float]]]] = []

    def _epoch(self, now: float) -> int:
        return int(now // self.config.epoch_seconds)

    def resolve_bssid(self, digest: str, now: float) -> WifiTempId:
        """Stable random identifier for a fingerprint within one epoch."""
        self.purge_expired(now)
        epoch = self._epoch(now)
        entry = self._temp_ids.get(digest)
        if entry is None or entry[0] != epoch:
            entry = (epoch, secrets.token_hex(8))
            self._temp_ids[digest] = entry
        issued_at = epoch * self.config.epoch_seconds
        return WifiTempId(id=entry[1], issued_at=issued_at,
                          ttl=self.config.epoch_seconds)

    def submit(self, single_use_id: str, digest: str, ts: float) -> None:
        if single_use_id in self._round_ids:
            raise DuplicateSingleUseId(single_use_id)
        self._round_ids.add(single_use_id)
        self._round.append((single_use_id, digest, ts))

    def close_round(self, now: float) -> set[tuple[str, str]]:
        """Match the buffered round and schedule its inputs for destruction."""
        pairs = match_round(self._round, self.config.epoch_seconds)
        if self.config.retention_seconds > 0:
            self._retained.append((now + self.config.retention_seconds, self._round))
        self._round = []
        self._round_ids = set()
        self.purge_expired(now)
        return pairs

    def purge_expired(self, now: float) -> None:
        self._retained = [(t, subs) for t, subs in self._retained if t > now]
        epoch = self._epoch(now)
        stale = [d for d, (e, _) in self._temp_ids.items() if e != epoch]
        for d in stale:
            del self._temp_ids[d]

    def storage_snapshot(self) -> dict:
        """Everything the matcher currently persists, for privacy audits."""
        return {
            "temp_ids": {d: {"epoch": e, "temp_id": t} for d, (e, t) in self._temp_ids.items()},
            "round": [list(s) for s in self._round],
            "retained": [{"destroy_at": t, "submissions": [list(s) for s in subs]}
                         for t, subs in self._retained],
        }


class SingleUseRegistry:
    """Main-server side: which device announced which single-use identifier.

    Entries are consumed when a round's pairs are linked, so an identifier
    never survives across rounds.
    """

    def __init__(self):
        self._entries: dict[str, tuple[str, float]] = {}
        self.dropped_unknown = 0

    def announce(self, single_use_id: str, device: str, ts: float) -> None:
        self._entries[single_use_id] = (device, ts)

    def __len__(self) -> int:
        return len(self._entries)

    def link_pairs(self, pairs) -> list[tuple[str, str, float]]:
        """Resolve matcher pairs to device-level co-presence observations.

        Unknown ids are dropped (counted), self-pairs suppressed, and every
        id touched by the round is consumed.
        """
        out = []
        for s1, s2 in pairs:
            e1 = self._entries.pop(s1, None)
            e2 = self._entries.pop(s2, None)
            if e1 is None or e2 is None:
                self.dropped_unknown += 1
                continue
            (d1, t1), (d2, t2) = e1, e2
            if d1 == d2:
                continue
            out.append((d1, d2, min(t1, t2)))
        return out

    def storage_snapshot(self) -> dict:
        return {s: {"device": d, "ts": t} for s, (d, t) in self._entries.items()}


def link_pairs(pairs, registry: SingleUseRegistry) -> list[tuple[str, str, float]]:
    return registry.link_pairs(pairs)
