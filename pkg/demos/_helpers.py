"""Shared demo plumbing."""

from netdist import BLE, DetectionRecord


def meet(svc, dev_a, dev_b, start, minutes, rssi=-58.0):
    """Mirrored close-range scans every five minutes across a meeting."""
    t = start
    n = 0
    while t <= start + minutes * 60.0:
        token = f"scan-{dev_a[:4]}-{dev_b[:4]}-{start}-{n}"
        for dev in (dev_a, dev_b):
            svc.ingest_detection(DetectionRecord(
                reporter=dev, channel=BLE, timestamp=t,
                peer_temp_id=token, rssi=rssi), now=start + 7200)
        t += 300.0
        n += 1
