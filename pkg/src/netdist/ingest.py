"""Co-presence ingestion: sensor detection records in, contact edges out.

The pipeline accepts timestamped detection records from registered devices
(Bluetooth scans with RSSI, ultrasound distance estimates, Wi-Fi access-point
observations), joins the two sides of each encounter, stitches repeated scans
into co-presence intervals, and derives contact edges whenever a pair has
accumulated enough near-proximity or shared-Wi-Fi time inside a query window.

Client contract for joining: the two devices in a Bluetooth/ultrasound
encounter report the same short-lived encounter token (``peer_temp_id``), one
token per scan. Two devices on the same access point report the same
``wifi_temp_id`` (issued by the matching entity). Equality of these opaque
identifiers is the only join key the server ever needs, so it never learns
anything about the radio environment itself.

All join state is kept as order-independent aggregates (min/max per token and
reporter), so the derived edge set depends only on the multiset of accepted
records, never on arrival order.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass

from .config import IngestConfig
from .util import DAY_S

BLE = "BLE"
ULTRASOUND = "ULTRASOUND"
WIFI = "WIFI"
CHANNELS = (BLE, ULTRASOUND, WIFI)

PROXIMITY_CHANNELS = (BLE, ULTRASOUND)


class IngestRejected(ValueError):
    """A detection record failed validation. ``reason`` is machine-readable."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


class UnknownDeviceError(KeyError):
    def __init__(self, device: str):
        self.device = device
        super().__init__(f"unknown device {device}")


class DeviceRegistry:
    """Issues pseudonymous device identifiers and remembers community scope.

    A device identifier is a random version-4 UUID minted at registration.
    Nothing derivable from hardware, phone numbers or accounts is ever stored
    next to it; the optional community string only scopes token redemption.
    """

    def __init__(self):
        self._communities: dict[str, str | None] = {}

    def register(self, community: str | None = None) -> str:
        device = str(uuid.uuid4())
        self._communities[device] = community
        return device

    def add(self, device: str, community: str | None = None) -> None:
        """Re-admit a known identifier (replay path)."""
        self._communities[device] = community

    def __contains__(self, device: str) -> bool:
        return device in self._communities

    def __len__(self) -> int:
        return len(self._communities)

    def devices(self) -> list[str]:
        return list(self._communities)

    def community_of(self, device: str) -> str | None:
        if device not in self._communities:
            raise UnknownDeviceError(device)
        return self._communities[device]


@dataclass(frozen=True)
class DetectionRecord:
    """One timestamped sensor observation reported by a single device."""

    reporter: str
    channel: str
    timestamp: float
    peer_temp_id: str | None = None
    rssi: float | None = None
    est_distance_m: float | None = None
    wifi_temp_id: str | None = None

    def validate_fields(self) -> None:
        """Check that exactly the fields for this record's channel are set."""
        if self.channel not in CHANNELS:
            raise IngestRejected("malformed-channel-fields", f"unknown channel {self.channel!r}")
        if self.channel == BLE:
            bad = self.peer_temp_id is None or self.est_distance_m is not None or self.wifi_temp_id is not None
        elif self.channel == ULTRASOUND:
            bad = self.peer_temp_id is None or self.rssi is not None or self.wifi_temp_id is not None
            if self.est_distance_m is not None and self.est_distance_m < 0:
                raise IngestRejected("malformed-channel-fields", "est_distance_m must be >= 0")
        else:
            bad = self.wifi_temp_id is None or self.peer_temp_id is not None \
                or self.rssi is not None or self.est_distance_m is not None
        if bad:
            raise IngestRejected("malformed-channel-fields", f"wrong fields for channel {self.channel}")

    def to_json_dict(self) -> dict:
        out = {"reporter": self.reporter, "channel": self.channel, "timestamp": self.timestamp}
        for name in ("peer_temp_id", "rssi", "est_distance_m", "wifi_temp_id"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    def content_key(self) -> tuple:
        """Cheap exact-duplicate key (field tuple, no serialization)."""
        return (self.reporter, self.channel, self.timestamp, self.peer_temp_id,
                self.rssi, self.est_distance_m, self.wifi_temp_id)

    @classmethod
    def from_json_dict(cls, data: dict) -> "DetectionRecord":
        allowed = {"reporter", "channel", "timestamp", "peer_temp_id", "rssi",
                   "est_distance_m", "wifi_temp_id"}
        unknown = set(data) - allowed
        if unknown:
            raise IngestRejected("malformed-channel-fields", f"unknown fields {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise IngestRejected("malformed-channel-fields", str(exc)) from exc


@dataclass(frozen=True)
class CoPresenceInterval:
    """A stretch of time during which two devices witnessed each other.

    The device pair is stored once, in canonical order. ``min_distance_m`` is
    the closest distance estimate seen inside the interval, when any sensor
    produced one.
    """

    a: str
    b: str
    channel: str
    start: float
    end: float
    min_distance_m: float | None = None

    def __post_init__(self):
        if self.a > self.b:
            a, b = self.a, self.b
            object.__setattr__(self, "a", b)
            object.__setattr__(self, "b", a)
        if self.end < self.start:
            raise ValueError("interval end before start")


@dataclass(frozen=True)
class ContactEdge:
    """An unordered device pair whose co-presence met the contact thresholds."""

    a: str
    b: str
    last_qualified_at: float

    def __post_init__(self):
        if self.a > self.b:
            a, b = self.a, self.b
            object.__setattr__(self, "a", b)
            object.__setattr__(self, "b", a)

    def pair(self) -> tuple[str, str]:
        return (self.a, self.b)


def _pair(x: str, y: str) -> tuple[str, str]:
    return (x, y) if x < y else (y, x)


class _TokenGroup:
    """Order-independent aggregate of the records sharing one encounter token."""

    __slots__ = ("per_reporter",)

    def __init__(self):
        # reporter -> [t_min, rssi_max, dist_min, saw_ultrasound]
        self.per_reporter: dict[str, list] = {}

    def add(self, rec: DetectionRecord) -> None:
        slot = self.per_reporter.get(rec.reporter)
        if slot is None:
            slot = [rec.timestamp, None, None, False]
            self.per_reporter[rec.reporter] = slot
        slot[0] = min(slot[0], rec.timestamp)
        if rec.rssi is not None:
            slot[1] = rec.rssi if slot[1] is None else max(slot[1], rec.rssi)
        if rec.est_distance_m is not None:
            slot[2] = rec.est_distance_m if slot[2] is None else min(slot[2], rec.est_distance_m)
        if rec.channel == ULTRASOUND:
            slot[3] = True


class IngestPipeline:
    """Accepts detection records and maintains the co-presence join state.

    The event log is append-only; exact duplicates are absorbed (same content
    hash), making resubmission idempotent. ``sink`` receives the JSON form of
    every newly accepted record, which is how the durable log file is fed.
    """

    def __init__(self, config: IngestConfig, registry: DeviceRegistry, sink=None):
        self.config = config
        self.registry = registry
        self.sink = sink
        self.records: list[DetectionRecord] = []
        self._lock = threading.Lock()   # commit point: one record at a time
        self._seen: set[tuple] = set()
        self._token_groups: dict[str, _TokenGroup] = {}
        # incremental, order-independent join state: each token's event is an
        # aggregate of all its records so far and is overwritten in place
        # (a, b) -> {token: (t, qualifies, dist, channel)}
        self._pair_events: dict[tuple[str, str], dict[str, tuple]] = {}
        self._pair_last: dict[tuple[str, str], float] = {}
        # (a, b) -> {channel: [[start, end, dist], ...]} stitched eagerly while
        # events arrive in time order; pairs fall back to a full rebuild when
        # an event arrives out of order or an aggregate is refined
        self._pair_intervals: dict[tuple[str, str], dict[str, list]] = {}
        self._pair_dirty: set[tuple[str, str]] = set()
        # (wifi_temp_id, reporter) -> [first_ts, last_ts]
        self._wifi_spans: dict[tuple[str, str], list] = {}
        self._wifi_reporters: dict[str, set[str]] = {}
        # (a, b) -> {temp_id: (block_start, block_end)}
        self._wifi_blocks: dict[tuple[str, str], dict[str, tuple[float, float]]] = {}
        self._wifi_last: dict[tuple[str, str], float] = {}

    # -- ingestion ---------------------------------------------------------

    def ingest(self, record: DetectionRecord, now: float) -> bool:
        """Validate and absorb one record. Returns False for exact duplicates.

        Raises IngestRejected with reason ``unknown-reporter``,
        ``stale-timestamp`` or ``malformed-channel-fields``.
        """
        record.validate_fields()
        if record.reporter not in self.registry:
            raise IngestRejected("unknown-reporter", record.reporter)
        horizon = self.config.horizon_days * DAY_S
        if record.timestamp < now - horizon:
            raise IngestRejected("stale-timestamp", f"{record.timestamp} older than horizon")
        if record.timestamp > now + self.config.future_skew_seconds:
            raise IngestRejected("stale-timestamp", f"{record.timestamp} too far in the future")

        with self._lock:
            key = record.content_key()
            if key in self._seen:
                return False
            self._seen.add(key)
            self.records.append(record)
            if self.sink is not None:
                self.sink(record.to_json_dict())
            self._index(record)
        return True

    def replay_record(self, record: DetectionRecord) -> bool:
        """Absorb a historical record without the freshness check (log replay)."""
        record.validate_fields()
        if record.reporter not in self.registry:
            raise IngestRejected("unknown-reporter", record.reporter)
        with self._lock:
            key = record.content_key()
            if key in self._seen:
                return False
            self._seen.add(key)
            self.records.append(record)
            self._index(record)
        return True

    def _index(self, rec: DetectionRecord) -> None:
        if rec.channel == WIFI:
            pad = self.config.pair_tolerance_seconds
            span_key = (rec.wifi_temp_id, rec.reporter)
            span = self._wifi_spans.get(span_key)
            if span is None:
                span = self._wifi_spans[span_key] = [rec.timestamp, rec.timestamp]
            else:
                span[0] = min(span[0], rec.timestamp)
                span[1] = max(span[1], rec.timestamp)
            reporters = self._wifi_reporters.setdefault(rec.wifi_temp_id, set())
            reporters.add(rec.reporter)
            for other in reporters:
                if other == rec.reporter:
                    continue
                other_span = self._wifi_spans[(rec.wifi_temp_id, other)]
                start = max(span[0], other_span[0]) - pad
                end = min(span[1], other_span[1]) + pad
                if end < start:
                    continue
                pair = _pair(rec.reporter, other)
                self._wifi_blocks.setdefault(pair, {})[rec.wifi_temp_id] = (start, end)
                self._wifi_last[pair] = max(self._wifi_last.get(pair, end), end)
            return

        group = self._token_groups.get(rec.peer_temp_id)
        if group is None:
            group = self._token_groups[rec.peer_temp_id] = _TokenGroup()
        group.add(rec)
        for other in group.per_reporter:
            if other == rec.reporter:
                continue
            event = self._token_event(group, rec.reporter, other)
            if event is None:
                continue
            pair = _pair(rec.reporter, other)
            events = self._pair_events.setdefault(pair, {})
            known = rec.peer_temp_id in events
            events[rec.peer_temp_id] = event
            self._pair_last[pair] = max(self._pair_last.get(pair, event[0]), event[0])
            if known:
                self._pair_dirty.add(pair)   # aggregate refined, restitch later
            else:
                self._extend_intervals(pair, event)

    def _extend_intervals(self, pair: tuple[str, str], event: tuple) -> None:
        t, qualifies, dist, channel = event
        if pair in self._pair_dirty:
            return
        if not qualifies:
            return
        lst = self._pair_intervals.setdefault(pair, {}).setdefault(channel, [])
        if not lst:
            lst.append([t, t, dist])
            return
        last = lst[-1]
        if t >= last[1]:
            if t - last[1] <= self.config.stitch_gap_seconds:
                last[1] = t
                if dist is not None:
                    last[2] = dist if last[2] is None else min(last[2], dist)
            else:
                lst.append([t, t, dist])
        else:
            self._pair_dirty.add(pair)       # out-of-order arrival, restitch later

    def _restitch(self, pair: tuple[str, str]) -> None:
        channels: dict[str, list] = {}
        gap = self.config.stitch_gap_seconds
        for t, qualifies, dist, channel in sorted(self._pair_events[pair].values(),
                                                  key=lambda e: e[0]):
            if not qualifies:
                continue
            lst = channels.setdefault(channel, [])
            if lst and t - lst[-1][1] <= gap:
                lst[-1][1] = t
                if dist is not None:
                    lst[-1][2] = dist if lst[-1][2] is None else min(lst[-1][2], dist)
            else:
                lst.append([t, t, dist])
        self._pair_intervals[pair] = channels

    def _token_event(self, group: _TokenGroup, x: str, y: str) -> tuple | None:
        """Joined encounter event (time, qualifies, distance, channel) for one
        token and one reporter pair, or None when the two sides are too far
        apart in time to be the same encounter."""
        cfg = self.config
        sa = group.per_reporter[x]
        sb = group.per_reporter[y]
        if abs(sa[0] - sb[0]) > cfg.pair_tolerance_seconds:
            return None
        t = min(sa[0], sb[0])
        if sa[2] is not None and sb[2] is not None:
            dist = min(sa[2], sb[2])
        else:
            dist = sa[2] if sa[2] is not None else sb[2]
        saw_ultra = sa[3] or sb[3]
        if dist is not None:
            qualifies = dist <= cfg.max_distance_m
        elif saw_ultra:
            qualifies = True  # ultrasound does not cross airspaces
        else:
            rssis = [s[1] for s in (sa, sb) if s[1] is not None]
            qualifies = bool(rssis) and max(rssis) >= cfg.rssi_cutoff_db
        return (t, qualifies, dist, ULTRASOUND if saw_ultra else BLE)

    # -- interval materialization -------------------------------------------

    def co_presence_intervals(self, window: tuple[float, float] | None = None) -> list[CoPresenceInterval]:
        """Materialize stitched co-presence intervals from the join state.

        When ``window`` is given, pairs and intervals that cannot intersect
        it are skipped; the remaining intervals are returned unclipped so
        duration accounting against the window stays the caller's job.
        """
        cfg = self.config
        t0 = window[0] if window is not None else None
        out: list[CoPresenceInterval] = []
        with self._lock:
            return self._materialize_locked(window, t0, out)

    def _materialize_locked(self, window, t0, out) -> list[CoPresenceInterval]:
        cfg = self.config
        for pair in self._pair_dirty:
            self._restitch(pair)
        self._pair_dirty.clear()

        for pair, channels in self._pair_intervals.items():
            if t0 is not None and self._pair_last[pair] < t0:
                continue
            for channel, stitched in channels.items():
                if window is None:
                    chosen = stitched
                else:
                    # intervals are disjoint and time-ordered: walk back from
                    # the tail while they can still intersect the window
                    idx = len(stitched)
                    while idx > 0 and stitched[idx - 1][1] >= window[0]:
                        idx -= 1
                    chosen = [iv for iv in stitched[idx:] if iv[0] < window[1]]
                for start, end, dist in chosen:
                    out.append(CoPresenceInterval(pair[0], pair[1], channel, start, end, dist))

        for pair, blocks in self._wifi_blocks.items():
            if t0 is not None and self._wifi_last[pair] < t0:
                continue
            for start, end in _merge_blocks(sorted(blocks.values()), cfg.wifi_stitch_gap_seconds):
                if window is not None and (end < window[0] or start >= window[1]):
                    continue
                out.append(CoPresenceInterval(pair[0], pair[1], WIFI, start, end))

        out.sort(key=lambda iv: (iv.a, iv.b, iv.channel, iv.start, iv.end))
        return out

    def derive_edges(self, window: tuple[float, float]) -> set[ContactEdge]:
        return derive_edges(self.co_presence_intervals(window), window, self.config)


def _merge_blocks(blocks: list[tuple[float, float]], gap: float):
    if not blocks:
        return
    start, end = blocks[0]
    for s, e in blocks[1:]:
        if s - end <= gap:
            end = max(end, e)
        else:
            yield start, end
            start, end = s, e
    yield start, end


def _union_seconds(spans: list[tuple[float, float]]) -> tuple[float, float | None]:
    """Total measure of a union of spans, plus the latest covered moment."""
    if not spans:
        return 0.0, None
    spans.sort()
    total = 0.0
    cur_s, cur_e = spans[0]
    latest = cur_e
    for s, e in spans[1:]:
        if s > cur_e:
            total += cur_e - cur_s
            cur_s, cur_e = s, e
        else:
            cur_e = max(cur_e, e)
        latest = max(latest, e)
    total += cur_e - cur_s
    return total, latest


def derive_edges(intervals, window: tuple[float, float], config: IngestConfig | None = None) -> set[ContactEdge]:
    """Emit a contact edge for every pair whose in-window co-presence meets the
    thresholds: accumulated near-proximity time (Bluetooth/ultrasound at close
    range) or accumulated same-access-point time. Durations accumulate across
    disjoint intervals of the same class; overlaps never double-count.
    """
    cfg = config or IngestConfig()
    t0, t1 = window
    prox: dict[tuple[str, str], list[tuple[float, float]]] = {}
    wifi: dict[tuple[str, str], list[tuple[float, float]]] = {}
    for iv in intervals:
        start = max(iv.start, t0)
        end = min(iv.end, t1)
        if end < start:
            continue
        key = (iv.a, iv.b)
        if iv.channel == WIFI:
            wifi.setdefault(key, []).append((start, end))
        elif iv.min_distance_m is None or iv.min_distance_m <= cfg.max_distance_m:
            prox.setdefault(key, []).append((start, end))

    edges: set[ContactEdge] = set()
    for key in prox.keys() | wifi.keys():
        qualified_at = None
        prox_total, prox_latest = _union_seconds(prox.get(key, []))
        if prox_total >= cfg.proximity_seconds:
            qualified_at = prox_latest
        wifi_total, wifi_latest = _union_seconds(wifi.get(key, []))
        if wifi_total >= cfg.wifi_seconds:
            qualified_at = wifi_latest if qualified_at is None else max(qualified_at, wifi_latest)
        if qualified_at is not None:
            edges.add(ContactEdge(key[0], key[1], qualified_at))
    return edges


def fresh_encounter_token() -> str:
    """Short-lived random token two devices share for one scan."""
    return uuid.uuid4().hex[:16]
