"""Shared test helpers: quick ways to build devices, detections and services."""

import pytest

from netdist import BLE, DetectionRecord, DeviceRegistry
from netdist.config import Config, IngestConfig
from netdist.ingest import IngestPipeline
from netdist.service import SignalService

BASE_T = 18000 * 86400.0  # a fixed UTC midnight
DAY = 86400.0


def make_pipeline(registry=None, **cfg_overrides):
    cfg = IngestConfig(**cfg_overrides)
    return IngestPipeline(cfg, registry or DeviceRegistry())


def feed_copresence(service_or_pipeline, dev_a, dev_b, start, minutes,
                    now=None, rssi=-60.0, scan_gap=300.0):
    """Mirrored close-range scans every scan_gap seconds across the span."""
    now = now if now is not None else start + minutes * 60.0 + 3600.0
    pipeline = getattr(service_or_pipeline, "pipeline", service_or_pipeline)
    is_service = pipeline is not service_or_pipeline
    t = start
    n = 0
    while t <= start + minutes * 60.0:
        token = f"tok-{dev_a[:6]}-{dev_b[:6]}-{n}"
        for dev in (dev_a, dev_b):
            rec = DetectionRecord(reporter=dev, channel=BLE, timestamp=t,
                                  peer_temp_id=token, rssi=rssi)
            if is_service:
                service_or_pipeline.ingest_detection(rec, now=now)
            else:
                pipeline.ingest(rec, now=now)
        t += scan_gap
        n += 1


@pytest.fixture
def service():
    svc = SignalService(Config(), clock=lambda: BASE_T + 30 * DAY)
    svc.config.tokens.authorities["health"] = "hunter2"
    return svc


def path_scenario(n_devices=6, base=BASE_T + 20 * DAY):
    """Devices in a path: 0-1-2-...-(n-1), each edge a 20-minute encounter."""
    svc = SignalService(Config(), clock=lambda: base + DAY)
    svc.config.tokens.authorities["health"] = "hunter2"
    devices = [svc.register_device(ts=base) for _ in range(n_devices)]
    for k in range(n_devices - 1):
        feed_copresence(svc, devices[k], devices[k + 1], base + 3600.0 * k, 20)
    return svc, devices
