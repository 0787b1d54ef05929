"""Per-user case charts: every new case is pinned at the viewer's network
distance at report time and fades a fixed number of days after symptom start
(contact cases anchor on the report time instead, having no symptom date).

A pinned signal never moves between distance columns and is never re-derived
from later movement of the case; the only thing time changes is expiry.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import ContactGraph
from .reporting import CaseReport, POSITIVE
from .util import DAY_S, date_to_ts


@dataclass(frozen=True)
class PinnedSignal:
    case_id: str
    viewer: str
    distance: int                # 1..max_depth; unreachable viewers get no signal
    kind: str
    pinned_at: float
    visible_until: float

    def active_at(self, now: float) -> bool:
        return self.pinned_at <= now < self.visible_until


@dataclass
class CaseChart:
    positive: list[int]
    contact: list[int]
    as_of: float

    def to_json_dict(self) -> dict:
        return {"positive": self.positive, "contact": self.contact, "as_of": self.as_of}

    def total(self) -> int:
        return sum(self.positive) + sum(self.contact)


class ChartEngine:
    """Materializes per-viewer signals at report time and renders charts."""

    def __init__(self, fade_days: float = 10.0, max_depth: int = 12):
        self.fade_days = fade_days
        self.max_depth = max_depth
        self._signals: dict[str, list[PinnedSignal]] = {}
        # (device, kind) -> visible_until of the newest active case, so a
        # duplicate report inside one fade window does not double-count a person
        self._active_case: dict[tuple[str, str], float] = {}

    def visible_until_for(self, report: CaseReport) -> float:
        if report.kind == POSITIVE and report.symptom_start is not None:
            return date_to_ts(report.symptom_start) + self.fade_days * DAY_S
        return report.reported_at + self.fade_days * DAY_S

    def pin_case(self, report: CaseReport, graph: ContactGraph) -> list[PinnedSignal]:
        """Fan a report out to every connected viewer at their current distance.

        The distances are frozen here; later graph changes never touch them.
        Returns the created signals (empty when the case is already faded or
        duplicates an active case from the same device).
        """
        visible_until = self.visible_until_for(report)
        if visible_until <= report.reported_at:
            return []
        key = (report.device, report.kind)
        if self._active_case.get(key, float("-inf")) > report.reported_at:
            return []
        self._active_case[key] = visible_until

        created = []
        for viewer, d in graph.distances_from([report.device], self.max_depth).items():
            if viewer == report.device or d < 1 or d > self.max_depth:
                continue
            sig = PinnedSignal(case_id=report.case_id, viewer=viewer, distance=d,
                               kind=report.kind, pinned_at=report.reported_at,
                               visible_until=visible_until)
            self._signals.setdefault(viewer, []).append(sig)
            created.append(sig)
        return created

    def signals_for(self, viewer: str) -> list[PinnedSignal]:
        return self._signals.get(viewer, [])

    def all_signals(self):
        for signals in self._signals.values():
            yield from signals

    def render_chart(self, viewer: str, now: float) -> CaseChart:
        positive = [0] * self.max_depth
        contact = [0] * self.max_depth
        for sig in self._signals.get(viewer, ()):
            if sig.active_at(now):
                (positive if sig.kind == POSITIVE else contact)[sig.distance - 1] += 1
        return CaseChart(positive=positive, contact=contact, as_of=now)

    def export_frames(self, viewer: str, t0: float, t1: float, step: float) -> list[CaseChart]:
        """Chart frames at t0, t0+step, ... while within t1 (inclusive)."""
        if t1 < t0:
            raise ValueError("t1 must be >= t0")
        if step <= 0:
            raise ValueError("step must be positive")
        frames = []
        k = 0
        while True:
            t = t0 + k * step
            if t > t1:
                break
            frames.append(self.render_chart(viewer, t))
            k += 1
        return frames

    def alerted(self, viewer: str, now: float, alert_distance: int) -> bool:
        """Any active signal within the alert distance?"""
        return any(sig.active_at(now) and sig.distance <= alert_distance
                   for sig in self._signals.get(viewer, ()))

    def min_active_distance(self, viewer: str, now: float) -> int | None:
        dists = [sig.distance for sig in self._signals.get(viewer, ()) if sig.active_at(now)]
        return min(dists) if dists else None
