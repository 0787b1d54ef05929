"""Pinned signals: fan-out at report time, fixed columns, exact fade."""

from datetime import datetime, timezone
import uuid

import pytest

from netdist import CONTACT, POSITIVE, CaseReport, ChartEngine, ContactGraph
from netdist.util import DAY_S, date_to_ts

from conftest import BASE_T

REPORT_T = BASE_T + 20 * DAY_S


def date_of(ts):
    return datetime.fromtimestamp(ts, tz=timezone.utc).date()


def graph_of(edges, nodes=None):
    node_set = set(nodes or [])
    for a, b in edges:
        node_set.update((a, b))
    return ContactGraph(node_set, edges, as_of=REPORT_T)


def report(device, kind=POSITIVE, reported_at=REPORT_T, symptom_days_before=0):
    symptom = date_of(reported_at - symptom_days_before * DAY_S) \
        if kind == POSITIVE else None
    return CaseReport(case_id=str(uuid.uuid4()), device=device, kind=kind,
                      reported_at=reported_at, symptom_start=symptom)


def path(n):
    return graph_of([(f"v{i}", f"v{i+1}") for i in range(n - 1)])


def test_pin_at_viewer_distance():
    engine = ChartEngine()
    signals = engine.pin_case(report("v0"), path(5))
    by_viewer = {s.viewer: s.distance for s in signals}
    assert by_viewer == {"v1": 1, "v2": 2, "v3": 3, "v4": 4}


def test_reporter_gets_no_signal_for_own_case():
    engine = ChartEngine()
    engine.pin_case(report("v0"), path(3))
    assert engine.signals_for("v0") == []


def test_disconnected_viewer_gets_no_signal():
    engine = ChartEngine()
    g = graph_of([("v0", "v1")], nodes=["far"])
    signals = engine.pin_case(report("v0"), g)
    assert {s.viewer for s in signals} == {"v1"}


def test_visible_until_anchors_on_symptom_start():
    engine = ChartEngine(fade_days=10.0)
    # symptoms started 4 days before the report: 6 more days of visibility
    signals = engine.pin_case(report("v0", symptom_days_before=4), path(2))
    (sig,) = signals
    symptom_ts = date_to_ts(date_of(REPORT_T - 4 * DAY_S))
    assert sig.visible_until == symptom_ts + 10 * DAY_S
    assert sig.visible_until - REPORT_T == pytest.approx(6 * DAY_S)


def test_contact_fade_anchors_on_report_time():
    engine = ChartEngine(fade_days=10.0)
    (sig,) = engine.pin_case(report("v0", kind=CONTACT), path(2))
    assert sig.visible_until == REPORT_T + 10 * DAY_S


def test_stale_symptom_date_creates_no_signals():
    engine = ChartEngine(fade_days=10.0)
    assert engine.pin_case(report("v0", symptom_days_before=11), path(3)) == []


def test_render_no_signals_all_zero():
    engine = ChartEngine()
    chart = engine.render_chart("anyone", REPORT_T)
    assert chart.positive == [0] * 12 and chart.contact == [0] * 12


def test_positive_and_contact_overlay_same_cell():
    engine = ChartEngine()
    g = graph_of([("v0", "m"), ("m", "viewer"), ("c0", "m")])
    engine.pin_case(report("v0"), g)
    engine.pin_case(report("c0", kind=CONTACT), g)
    chart = engine.render_chart("viewer", REPORT_T + 1)
    assert chart.positive[1] == 1
    assert chart.contact[1] == 1
    assert sum(chart.positive) == sum(chart.contact) == 1


def test_fade_exactness_day_boundary():
    engine = ChartEngine(fade_days=10.0)
    engine.pin_case(report("v0", symptom_days_before=0), path(2))
    fade_ts = date_to_ts(date_of(REPORT_T)) + 10 * DAY_S
    assert engine.render_chart("v1", fade_ts - 1.0).positive[0] == 1
    assert engine.render_chart("v1", fade_ts).positive[0] == 0
    assert engine.render_chart("v1", fade_ts + 1.0).positive[0] == 0


def test_signal_absent_at_symptom_start_plus_11_days():
    engine = ChartEngine(fade_days=10.0)
    engine.pin_case(report("v0"), path(2))
    assert engine.render_chart("v1", REPORT_T + 11 * DAY_S).total() == 0


def test_signal_not_visible_before_report():
    engine = ChartEngine()
    engine.pin_case(report("v0"), path(2))
    assert engine.render_chart("v1", REPORT_T - 1.0).total() == 0


def test_pin_immutability_under_graph_changes():
    engine = ChartEngine()
    (first,) = [s for s in engine.pin_case(report("v0"), path(4)) if s.viewer == "v3"]
    assert first.distance == 3
    # a much shorter path appears afterwards; the pinned distance must not move
    denser = graph_of([("v0", "v3"), ("other", "v3")])
    engine.pin_case(report("other", reported_at=REPORT_T + 3600), denser)
    kept = [s for s in engine.signals_for("v3") if s.case_id == first.case_id]
    assert [(s.viewer, s.distance) for s in kept] == [("v3", 3)]
    chart = engine.render_chart("v3", REPORT_T + 7200)
    assert chart.positive[2] == 1  # still pinned at distance 3


def test_duplicate_report_within_fade_window_collapses():
    engine = ChartEngine()
    g = path(3)
    first = engine.pin_case(report("v0"), g)
    assert len(first) == 2
    again = engine.pin_case(report("v0", reported_at=REPORT_T + DAY_S), g)
    assert again == []
    chart = engine.render_chart("v1", REPORT_T + DAY_S + 1)
    assert chart.positive[0] == 1  # one person, one bar


def test_new_case_after_fade_pins_again():
    engine = ChartEngine(fade_days=10.0)
    g = path(2)
    engine.pin_case(report("v0"), g)
    later = REPORT_T + 30 * DAY_S
    signals = engine.pin_case(report("v0", reported_at=later), g)
    assert len(signals) == 1


def test_count_conservation_across_viewers():
    engine = ChartEngine()
    g = path(7)
    signals = engine.pin_case(report("v0"), g)
    reachable = {v for v, d in g.distances_from(["v0"]).items() if 1 <= d <= 12}
    total = 0
    for viewer in g.nodes():
        total += sum(engine.render_chart(viewer, REPORT_T + 1).positive)
    assert total == len(signals) == len(reachable)


# -- frames -------------------------------------------------------------------


def test_frames_bar_appears_and_disappears_without_moving():
    engine = ChartEngine(fade_days=10.0)
    engine.pin_case(report("v0"), path(4))
    t0 = REPORT_T - 2 * DAY_S
    frames = engine.export_frames("v3", t0, t0 + 15 * DAY_S, DAY_S)
    lifecycles = [frame.positive for frame in frames]
    nonzero = [f for f in lifecycles if sum(f) > 0]
    assert nonzero, "bar never appeared"
    assert all(f[2] == 1 and sum(f) == 1 for f in nonzero), "bar moved columns"
    assert sum(lifecycles[0]) == 0 and sum(lifecycles[-1]) == 0


def test_frames_single_when_step_exceeds_range():
    engine = ChartEngine()
    frames = engine.export_frames("v", REPORT_T, REPORT_T + 100.0, 500.0)
    assert len(frames) == 1 and frames[0].as_of == REPORT_T


def test_frames_inclusive_endpoints_day_step():
    engine = ChartEngine()
    frames = engine.export_frames("v", REPORT_T, REPORT_T + 14 * DAY_S, DAY_S)
    assert len(frames) == 15


def test_frames_match_per_frame_render():
    engine = ChartEngine()
    g = path(5)
    engine.pin_case(report("v0"), g)
    engine.pin_case(report("v4", kind=CONTACT, reported_at=REPORT_T + 2 * DAY_S), g)
    t0, t1, step = REPORT_T - DAY_S, REPORT_T + 12 * DAY_S, DAY_S / 2
    frames = engine.export_frames("v2", t0, t1, step)
    k = 0
    while t0 + k * step <= t1:
        direct = engine.render_chart("v2", t0 + k * step)
        assert frames[k].positive == direct.positive
        assert frames[k].contact == direct.contact
        k += 1
    assert len(frames) == k


def test_frames_validate_arguments():
    engine = ChartEngine()
    with pytest.raises(ValueError):
        engine.export_frames("v", REPORT_T, REPORT_T - 1, 10.0)
    with pytest.raises(ValueError):
        engine.export_frames("v", REPORT_T, REPORT_T + 10, 0.0)
