"""The per-user case chart over time: pinning, overlay, and fade.

A case is reported at one end of a six-device chain. Every other user sees
it appear at their own network distance, the bar never moves columns, and it
disappears ten days after the symptom start date. A confirmed-contact token
redeemed by the case's neighbour overlays in the second series.

Run:  python3 demos/02_case_chart_lifecycle.py
"""

from datetime import datetime, timezone

from netdist import POSITIVE, CONTACT, SignalService
from netdist.config import Config

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent))
from _helpers import meet  # noqa: E402

DAY = 86400.0
T0 = 18000 * DAY


def bar(chart):
    cells = []
    for pos, con in zip(chart.positive, chart.contact):
        cells.append("#" * pos + "+" * con or ".")
    return " ".join(f"{c:>2}" for c in cells)


def main():
    svc = SignalService(Config(), clock=lambda: T0 + 2 * DAY)
    svc.config.tokens.authorities["clinic"] = "demo-secret"
    devices = [svc.register_device(ts=T0) for _ in range(6)]
    for k in range(5):
        meet(svc, devices[k], devices[k + 1], T0 + 3600.0 * k, 20)

    report_t = T0 + DAY
    symptom = datetime.fromtimestamp(T0, tz=timezone.utc).date()

    positive, contact = svc.issue_tokens("clinic", "demo-secret", POSITIVE, 1,
                                         now=report_t) + \
        svc.issue_tokens("clinic", "demo-secret", CONTACT, 1, now=report_t)
    svc.redeem_token(positive.token, devices[0], symptom, now=report_t)
    svc.redeem_token(contact.token, devices[1], None, now=report_t + 600)

    print("chart for each device right after the report")
    print("(# positive, + confirmed contact; columns are distances 1..12)\n")
    for k, dev in enumerate(devices):
        chart = svc.chart(dev, now=report_t + 3600)
        print(f"  device {k}: {bar(chart)}")

    viewer = devices[3]
    print(f"\ndaily frames for device 3 (case pinned at distance 3):")
    frames = svc.export_frames(viewer, report_t, report_t + 11 * DAY, DAY)
    for i, frame in enumerate(frames):
        print(f"  day {i:>2}: {bar(frame)}")
    print("\nthe bar holds its column and vanishes 10 days after symptom start")


if __name__ == "__main__":
    main()
