"""The central signal service: registration, detection ingestion, matcher
integration, token redemption and chart queries, over durable append-only
logs.

Two log files carry the whole state: ``events.jsonl`` holds detection records
exactly as submitted (one JSON object per line) and ``reports.jsonl`` holds
everything else the server does (registrations, token lifecycle, case
reports). Replaying both files deterministically reconstructs the service,
which is the primary correctness lever: the restart path and the live path
must produce identical charts for every device.

Privacy posture of the stores: the main service never persists hashed
access-point fingerprints (those stay with the matcher), consumed tokens are
recorded as bare digests in rows that never name a device, and case reports
never reference tokens.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from datetime import date
from pathlib import Path

from .charts import CaseChart, ChartEngine
from .config import Config
from .graph import ContactGraph, snapshot
from .ingest import (WIFI, DetectionRecord, DeviceRegistry, IngestPipeline,
                     UnknownDeviceError)
from .reporting import POSITIVE, CaseReport, TokenService, token_digest
from .util import canonical_json, content_hash
from .wifi import SingleUseRegistry, WifiMatcher


class AppendLog:
    """Append-only newline-delimited JSON file; flushed per record."""

    def __init__(self, path: Path, fsync: bool = False):
        self.path = path
        self.fsync = fsync
        self._fh = open(path, "a", encoding="utf-8")
        self._lock = threading.Lock()

    def append(self, row: dict) -> None:
        line = canonical_json(row) + "\n"
        with self._lock:
            self._fh.write(line)
            self._fh.flush()
            if self.fsync:
                os.fsync(self._fh.fileno())

    def close(self) -> None:
        self._fh.close()


class MalformedLogLine(ValueError):
    def __init__(self, path, line_no: int, detail: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {detail}")


def read_log(path: Path) -> list[dict]:
    rows = []
    if not path.exists():
        return rows
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLogLine(path, line_no, str(exc)) from exc
            if not isinstance(row, dict):
                raise MalformedLogLine(path, line_no, "expected a JSON object")
            rows.append(row)
    return rows


class SignalService:
    """In-process composition of registry, ingest, matcher, tokens and charts.

    ``clock`` supplies the current time and is injectable so the simulation
    testbed can drive the very same code paths on simulated time.
    """

    def __init__(self, config: Config | None = None, data_dir: str | Path | None = None,
                 clock=time.time):
        self.config = config or Config()
        self.clock = clock
        self.registry = DeviceRegistry()
        self.tokens = TokenService(self.config.tokens)
        self.charts = ChartEngine(fade_days=self.config.chart.fade_days,
                                  max_depth=self.config.graph.max_depth)
        self.reports: list[CaseReport] = []
        self.generation = 0

        data_dir = data_dir if data_dir is not None else (self.config.server.data_dir or None)
        self._event_log = None
        self._report_log = None
        if data_dir:
            d = Path(data_dir)
            d.mkdir(parents=True, exist_ok=True)
            self._event_log = AppendLog(d / "events.jsonl", fsync=self.config.server.fsync)
            self._report_log = AppendLog(d / "reports.jsonl", fsync=self.config.server.fsync)

        sink = self._event_log.append if self._event_log else None
        self.pipeline = IngestPipeline(self.config.ingest, self.registry, sink=sink)

        # split-trust matcher: separate storage, wired in-process
        self.matcher = WifiMatcher(self.config.wifi_matcher)
        self.single_use = SingleUseRegistry()

        self._report_rows: list[dict] = []   # in-memory mirror for audits
        self._snapshot_cache: tuple | None = None
        self._redeem_lock = threading.Lock()

    # -- time ---------------------------------------------------------------

    def now(self) -> float:
        return float(self.clock())

    # -- registration ---------------------------------------------------------

    def register_device(self, community: str | None = None, ts: float | None = None) -> str:
        ts = self.now() if ts is None else ts
        device = self.registry.register(community)
        self._log_report({"kind": "register", "device": device,
                          "community": community, "ts": ts})
        return device

    # -- detections -------------------------------------------------------------

    def ingest_detection(self, record: DetectionRecord | dict, now: float | None = None) -> bool:
        """Returns True when the record was appended, False for an exact
        duplicate. Raises IngestRejected otherwise."""
        if isinstance(record, dict):
            record = DetectionRecord.from_json_dict(record)
        accepted = self.pipeline.ingest(record, self.now() if now is None else now)
        if accepted:
            self.generation += 1
        return accepted

    # -- graph queries ------------------------------------------------------------

    def graph_snapshot(self, as_of: float | None = None) -> ContactGraph:
        as_of = self.now() if as_of is None else as_of
        key = (as_of, len(self.pipeline.records), len(self.registry))
        if self._snapshot_cache and self._snapshot_cache[0] == key:
            return self._snapshot_cache[1]
        g = snapshot(self.pipeline, as_of, generation=self.generation,
                     window_days=self.config.graph.window_days,
                     max_depth=self.config.graph.max_depth)
        self._snapshot_cache = (key, g)
        return g

    def network_chart(self, device: str, now: float | None = None) -> list[int]:
        if device not in self.registry:
            raise UnknownDeviceError(device)
        return self.graph_snapshot(now).user_count_histogram(device)

    # -- tokens and reports ----------------------------------------------------------

    def issue_tokens(self, authority: str, secret: str, kind: str, count: int,
                     now: float | None = None):
        self.tokens.authenticate(authority, secret)
        now = self.now() if now is None else now
        issued = self.tokens.issue(authority, kind, count, now)
        for tok in issued:
            self._log_report({"kind": "token_issued", "digest": token_digest(tok.token),
                              "token_kind": tok.kind, "authority": tok.authority,
                              "issued_at": tok.issued_at, "expires_at": tok.expires_at,
                              "ts": tok.issued_at})
        return issued

    def redeem_token(self, token: str, device: str, symptom_start: date | str | None,
                     now: float | None = None) -> CaseReport:
        if device not in self.registry:
            raise UnknownDeviceError(device)
        if isinstance(symptom_start, str):
            symptom_start = date.fromisoformat(symptom_start)
        now = self.now() if now is None else now
        community = self.registry.community_of(device)
        with self._redeem_lock:
            report = self.tokens.redeem(token, device, symptom_start, now,
                                        device_community=community)
            # two deliberately unlinked rows: the consumed token digest and the
            # pseudonymous case record
            self._log_report({"kind": "token_consumed",
                              "digest": token_digest(token), "ts": now})
            self._record_report(report)
        return report

    def report_unauthenticated(self, device: str, symptom_start: date | str | None,
                               now: float | None = None) -> CaseReport:
        """Self-report without a token; disabled unless the scenario opts in."""
        if not self.config.tokens.allow_unauthenticated:
            raise PermissionError("unauthenticated reporting is disabled")
        if device not in self.registry:
            raise UnknownDeviceError(device)
        if isinstance(symptom_start, str):
            symptom_start = date.fromisoformat(symptom_start)
        now = self.now() if now is None else now
        report = CaseReport(case_id=str(uuid.uuid4()), device=device, kind=POSITIVE,
                            reported_at=now, symptom_start=symptom_start)
        with self._redeem_lock:
            self._record_report(report)
        return report

    def _record_report(self, report: CaseReport) -> None:
        self.reports.append(report)
        self._log_report({"kind": "case_report", "case_id": report.case_id,
                          "device": report.device, "report_kind": report.kind,
                          "symptom_start": report.symptom_start.isoformat()
                          if report.symptom_start else None,
                          "reported_at": report.reported_at, "ts": report.reported_at})
        graph = self.graph_snapshot(report.reported_at)
        self.charts.pin_case(report, graph)
        self.generation += 1

    # -- charts ----------------------------------------------------------------

    def chart(self, device: str, now: float | None = None) -> CaseChart:
        if device not in self.registry:
            raise UnknownDeviceError(device)
        return self.charts.render_chart(device, self.now() if now is None else now)

    def export_frames(self, device: str, t0: float, t1: float, step: float) -> list[CaseChart]:
        if device not in self.registry:
            raise UnknownDeviceError(device)
        return self.charts.export_frames(device, t0, t1, step)

    # -- wifi matcher integration ------------------------------------------------

    def wifi_resolve(self, hashed_bssid: str, now: float | None = None):
        return self.matcher.resolve_bssid(hashed_bssid, self.now() if now is None else now)

    def wifi_submit(self, single_use_id: str, hashed_bssid: str, ts: float) -> None:
        self.matcher.submit(single_use_id, hashed_bssid, ts)

    def wifi_announce(self, single_use_id: str, device: str, ts: float) -> None:
        if device not in self.registry:
            raise UnknownDeviceError(device)
        self.single_use.announce(single_use_id, device, ts)

    def wifi_close_round(self, now: float | None = None) -> list[tuple[str, str, float]]:
        """Close the matcher round, link the pairs, and feed the resulting
        co-presence observations into the regular ingest path as mirrored
        Wi-Fi records sharing a synthetic identifier (so they live in the
        event log and replay like any other detection)."""
        now = self.now() if now is None else now
        pairs = self.matcher.close_round(now)
        observations = self.single_use.link_pairs(pairs)
        for a, b, ts in observations:
            marker = f"wp-{uuid.uuid4().hex[:12]}"
            for dev in (a, b):
                self.ingest_detection(DetectionRecord(
                    reporter=dev, channel=WIFI, timestamp=ts, wifi_temp_id=marker), now=now)
        return observations

    # -- health / audits ------------------------------------------------------------

    def health(self) -> dict:
        return {"status": "ok", "generation": self.generation}

    def _log_report(self, row: dict) -> None:
        self._report_rows.append(row)
        if self._report_log:
            self._report_log.append(row)

    def storage_snapshot(self) -> dict:
        """Every value the main service persists, for the privacy audits.
        The matcher's storage is deliberately not part of this: it is a
        separate trust domain with its own snapshot."""
        return {
            "devices": {d: self.registry.community_of(d) for d in self.registry.devices()},
            "detections": [r.to_json_dict() for r in self.pipeline.records],
            "tokens": self.tokens.token_rows(),
            "report_rows": list(self._report_rows),
            "case_reports": [
                {"case_id": r.case_id, "device": r.device, "kind": r.kind,
                 "reported_at": r.reported_at,
                 "symptom_start": r.symptom_start.isoformat() if r.symptom_start else None}
                for r in self.reports
            ],
            "pinned_signals": [
                {"case_id": s.case_id, "viewer": s.viewer, "distance": s.distance,
                 "kind": s.kind, "pinned_at": s.pinned_at, "visible_until": s.visible_until}
                for s in self.charts.all_signals()
            ],
            "single_use": self.single_use.storage_snapshot(),
        }

    def close(self) -> None:
        if self._event_log:
            self._event_log.close()
        if self._report_log:
            self._report_log.close()


def _commit_order(rows: list[tuple[float, dict, str]]) -> list[tuple[float, dict, str]]:
    """Canonical commit order: (timestamp, content hash)."""
    return sorted(rows, key=lambda item: (item[0], content_hash(item[1]), item[2]))


def replay(event_log: str | Path, report_log: str | Path,
           config: Config | None = None, clock=time.time) -> SignalService:
    """Rebuild a service from its two logs.

    Rows from both files are merged into the canonical commit order and
    applied in sequence; case reports are pinned against the graph exactly
    as of their report time, reproducing the live fan-out.
    """
    config = config or Config()
    service = SignalService(config=config, data_dir=None, clock=clock)

    merged: list[tuple[float, dict, str]] = []
    for row in read_log(Path(event_log)):
        ts = row.get("timestamp")
        if not isinstance(ts, (int, float)):
            raise MalformedLogLine(event_log, 0, "detection row missing numeric timestamp")
        merged.append((float(ts), row, "event"))
    for row in read_log(Path(report_log)):
        ts = row.get("ts")
        if not isinstance(ts, (int, float)):
            raise MalformedLogLine(report_log, 0, "report row missing numeric ts")
        merged.append((float(ts), row, "report"))

    for ts, row, source in _commit_order(merged):
        if source == "event":
            record = DetectionRecord.from_json_dict(row)
            service.pipeline.replay_record(record)
            service.generation += 1
            continue
        kind = row.get("kind")
        if kind == "register":
            service.registry.add(row["device"], row.get("community"))
        elif kind == "token_issued":
            service.tokens.restore(row["digest"], row["token_kind"], row["authority"],
                                   row["issued_at"], row["expires_at"])
        elif kind == "token_consumed":
            service.tokens.mark_consumed(row["digest"])
        elif kind == "case_report":
            symptom = row.get("symptom_start")
            report = CaseReport(case_id=row["case_id"], device=row["device"],
                                kind=row["report_kind"], reported_at=row["reported_at"],
                                symptom_start=date.fromisoformat(symptom) if symptom else None)
            service.reports.append(report)
            service._report_rows.append(row)
            graph = service.graph_snapshot(report.reported_at)
            service.charts.pin_case(report, graph)
        else:
            raise MalformedLogLine(report_log, 0, f"unknown report row kind {kind!r}")

    return service


def reopen(data_dir: str | Path, config: Config | None = None, clock=time.time) -> SignalService:
    """Restart path: replay the logs found in ``data_dir`` and continue
    appending to the same files."""
    config = config or Config()
    d = Path(data_dir)
    rebuilt = replay(d / "events.jsonl", d / "reports.jsonl", config=config, clock=clock)
    service = SignalService(config=config, data_dir=d, clock=clock)
    # adopt the rebuilt state, keep the fresh log handles
    service.registry = rebuilt.registry
    service.tokens = rebuilt.tokens
    service.charts = rebuilt.charts
    service.reports = rebuilt.reports
    service.generation = rebuilt.generation
    service._report_rows = rebuilt._report_rows
    rebuilt.pipeline.sink = service.pipeline.sink
    service.pipeline = rebuilt.pipeline
    return service
