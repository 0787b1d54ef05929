"""Service composition: durable logs, replay determinism, privacy audits."""

import json
import random
from datetime import date, datetime, timezone

import pytest

from netdist import POSITIVE, DetectionRecord
from netdist.config import Config
from netdist.service import MalformedLogLine, SignalService, read_log, reopen, replay
from conftest import BASE_T, DAY, feed_copresence

NOW = BASE_T + 30 * DAY


def files_service(tmp_path, now=NOW):
    cfg = Config()
    cfg.tokens.authorities["health"] = "hunter2"
    return SignalService(cfg, data_dir=tmp_path / "state", clock=lambda: now)


def charts_of(svc, now=NOW):
    return {dev: svc.chart(dev, now=now).to_json_dict() for dev in svc.registry.devices()}


def test_health_reports_generation():
    svc = SignalService(Config(), clock=lambda: NOW)
    assert svc.health() == {"status": "ok", "generation": 0}
    dev = svc.register_device(ts=BASE_T)
    peer = svc.register_device(ts=BASE_T)
    feed_copresence(svc, dev, peer, NOW - DAY, 20)
    assert svc.health()["generation"] > 0


def test_empty_logs_empty_state(tmp_path):
    svc = files_service(tmp_path)
    svc.close()
    rebuilt = replay(tmp_path / "state/events.jsonl", tmp_path / "state/reports.jsonl",
                     config=Config())
    assert len(rebuilt.registry) == 0
    assert rebuilt.graph_snapshot(NOW).edge_count() == 0


def scripted_workload(svc, start=BASE_T + 16 * DAY):
    devices = [svc.register_device(ts=start - DAY) for _ in range(6)]
    for k in range(5):
        feed_copresence(svc, devices[k], devices[k + 1], start + 3600.0 * k, 20,
                        now=start + DAY)
    (token,) = svc.issue_tokens("health", "hunter2", POSITIVE, 1, now=start + DAY)
    symptom = datetime.fromtimestamp(start, tz=timezone.utc).date()
    svc.redeem_token(token.token, devices[0], symptom, now=start + DAY)
    return devices


def test_full_replay_reproduces_charts(tmp_path):
    svc = files_service(tmp_path)
    scripted_workload(svc)
    want = charts_of(svc)
    svc.close()

    rebuilt = replay(tmp_path / "state/events.jsonl", tmp_path / "state/reports.jsonl",
                     config=svc.config)
    assert charts_of(rebuilt) == want
    assert rebuilt.graph_snapshot(NOW).edge_list() == svc.graph_snapshot(NOW).edge_list()


def test_restart_mid_workload_continues(tmp_path):
    start = BASE_T + 16 * DAY
    # uninterrupted reference run (in-memory)
    ref = SignalService(Config(), clock=lambda: NOW)
    ref.config.tokens.authorities["health"] = "hunter2"

    svc = files_service(tmp_path)
    ref_devices = [ref.register_device(ts=start - DAY) for _ in range(4)]
    devices = [svc.register_device(ts=start - DAY) for _ in range(4)]

    def feed(target, devs, k):
        feed_copresence(target, devs[k], devs[k + 1], start + 3600.0 * k, 20,
                        now=start + DAY)

    for k in range(2):
        feed(ref, ref_devices, k)
        feed(svc, devices, k)

    svc.close()  # crash here
    svc = reopen(tmp_path / "state", config=svc.config, clock=lambda: NOW)

    feed(ref, ref_devices, 2)
    feed(svc, devices, 2)
    (tok_ref,) = ref.issue_tokens("health", "hunter2", POSITIVE, 1, now=start + DAY)
    (tok,) = svc.issue_tokens("health", "hunter2", POSITIVE, 1, now=start + DAY)
    symptom = datetime.fromtimestamp(start, tz=timezone.utc).date()
    ref.redeem_token(tok_ref.token, ref_devices[0], symptom, now=start + DAY)
    svc.redeem_token(tok.token, devices[0], symptom, now=start + DAY)

    # same topology, same timing: charts must agree device-for-device
    ref_charts = [ref.chart(d, now=NOW).to_json_dict() for d in ref_devices]
    svc_charts = [svc.chart(d, now=NOW).to_json_dict() for d in devices]
    assert svc_charts == ref_charts
    svc.close()

    # and a cold replay of the restarted service's logs agrees too
    rebuilt = replay(tmp_path / "state/events.jsonl", tmp_path / "state/reports.jsonl",
                     config=svc.config)
    assert [rebuilt.chart(d, now=NOW).to_json_dict() for d in devices] == svc_charts


def test_replay_is_permutation_invariant(tmp_path):
    svc = files_service(tmp_path)
    scripted_workload(svc)
    want = charts_of(svc)
    svc.close()

    events_path = tmp_path / "state/events.jsonl"
    lines = events_path.read_text().splitlines()
    rng = random.Random(6)
    for _ in range(3):
        rng.shuffle(lines)
        events_path.write_text("\n".join(lines) + "\n")
        rebuilt = replay(events_path, tmp_path / "state/reports.jsonl",
                         config=svc.config)
        assert charts_of(rebuilt) == want


def test_malformed_log_line_identified(tmp_path):
    path = tmp_path / "events.jsonl"
    path.write_text('{"reporter": "a", "channel": "BLE", "timestamp": 1}\nnot json\n')
    with pytest.raises(MalformedLogLine) as err:
        read_log(path)
    assert err.value.line_no == 2
    assert "2" in str(err.value)


def test_event_log_lines_are_pure_detection_records(tmp_path):
    svc = files_service(tmp_path)
    scripted_workload(svc)
    svc.close()
    allowed = {"reporter", "channel", "timestamp", "peer_temp_id", "rssi",
               "est_distance_m", "wifi_temp_id"}
    for row in read_log(tmp_path / "state/events.jsonl"):
        assert set(row) <= allowed
        DetectionRecord.from_json_dict(row)  # must parse back


def test_unauthenticated_reporting_disabled_by_default():
    svc = SignalService(Config(), clock=lambda: NOW)
    dev = svc.register_device(ts=BASE_T)
    with pytest.raises(PermissionError):
        svc.report_unauthenticated(dev, date(2019, 5, 1))


def test_unauthenticated_reporting_behind_flag():
    cfg = Config()
    cfg.tokens.allow_unauthenticated = True
    svc = SignalService(cfg, clock=lambda: NOW)
    dev = svc.register_device(ts=NOW - DAY)
    report = svc.report_unauthenticated(dev, datetime.fromtimestamp(
        NOW, tz=timezone.utc).date(), now=NOW)
    assert report.kind == POSITIVE


def test_community_scope_enforced_end_to_end():
    cfg = Config()
    cfg.tokens.authorities.update({"uni": "s1", "city": "s2"})
    svc = SignalService(cfg, clock=lambda: NOW)
    dev = svc.register_device(community="uni", ts=NOW - DAY)
    (token,) = svc.issue_tokens("city", "s2", POSITIVE, 1, now=NOW)
    from netdist import RedemptionRejected
    with pytest.raises(RedemptionRejected) as err:
        svc.redeem_token(token.token, dev, date(2019, 5, 1), now=NOW)
    assert err.value.reason == "wrong-community-scope"


# -- privacy posture --------------------------------------------------------------


FORBIDDEN_FIELDS = {"gps", "lat", "lon", "latitude", "longitude", "bssid",
                    "hashed_bssid", "ssid", "imei", "mac", "phone", "msisdn",
                    "hardware_id", "serial"}


def field_names(obj, out):
    if isinstance(obj, dict):
        for k, v in obj.items():
            out.add(str(k).lower())
            field_names(v, out)
    elif isinstance(obj, (list, tuple, set)):
        for v in obj:
            field_names(v, out)


def test_no_pii_fields_anywhere_in_persisted_state(tmp_path):
    svc = files_service(tmp_path)
    scripted_workload(svc)
    svc.close()
    names: set = set()
    field_names(svc.storage_snapshot(), names)
    for row in read_log(tmp_path / "state/events.jsonl"):
        field_names(row, names)
    for row in read_log(tmp_path / "state/reports.jsonl"):
        field_names(row, names)
    assert not (names & FORBIDDEN_FIELDS)


def test_report_rows_never_join_token_and_device(tmp_path):
    svc = files_service(tmp_path)
    scripted_workload(svc)
    svc.close()
    rows = read_log(tmp_path / "state/reports.jsonl")
    assert any(r["kind"] == "token_consumed" for r in rows)
    assert any(r["kind"] == "case_report" for r in rows)
    for row in rows:
        has_digest = "digest" in row
        has_device = "device" in row and row.get("device")
        assert not (has_digest and has_device)


def test_single_emission_no_signals_from_post_report_movement():
    from netdist import Config as _C
    svc = SignalService(Config(), clock=lambda: NOW)
    svc.config.tokens.authorities["health"] = "hunter2"
    start = BASE_T + 16 * DAY
    a = svc.register_device(ts=start - DAY)
    b = svc.register_device(ts=start - DAY)
    stranger = svc.register_device(ts=start - DAY)
    feed_copresence(svc, a, b, start, 20, now=start + DAY)

    (token,) = svc.issue_tokens("health", "hunter2", POSITIVE, 1, now=start + DAY)
    symptom = datetime.fromtimestamp(start, tz=timezone.utc).date()
    svc.redeem_token(token.token, a, symptom, now=start + DAY)
    assert sum(svc.chart(stranger, now=start + DAY + 1).positive) == 0

    # the case keeps moving around after reporting; no new signals appear
    feed_copresence(svc, a, stranger, start + 2 * DAY, 30, now=start + 3 * DAY)
    assert sum(svc.chart(stranger, now=start + 3 * DAY).positive) == 0
    # while the graph itself did pick up the new edge
    assert svc.graph_snapshot(start + 3 * DAY).distance(a, stranger) == 1
