"""Build a small contact network from raw detections and query distances.

Six devices meet in a chain; each meeting is a series of mirrored Bluetooth
scans. The server joins the two sides of each scan, stitches them into
co-presence intervals, and emits a contact edge once a pair accumulates 15
minutes within close range inside the 14-day window.

Run:  python3 demos/01_contact_graph_basics.py
"""

from netdist import BLE, DetectionRecord, SignalService
from netdist.config import Config

DAY = 86400.0
T0 = 18000 * DAY  # a fixed UTC midnight


def meet(svc, dev_a, dev_b, start, minutes):
    """Both devices report the same encounter token for each scan."""
    t = start
    n = 0
    while t <= start + minutes * 60.0:
        token = f"scan-{dev_a[:4]}-{dev_b[:4]}-{n}"
        for dev in (dev_a, dev_b):
            svc.ingest_detection(DetectionRecord(
                reporter=dev, channel=BLE, timestamp=t,
                peer_temp_id=token, rssi=-58.0), now=start + 7200)
        t += 300.0
        n += 1


def main():
    svc = SignalService(Config(), clock=lambda: T0 + 2 * DAY)
    names = "ABCDEF"
    devices = {name: svc.register_device(ts=T0) for name in names}
    print("registered devices:")
    for name, dev in devices.items():
        print(f"  {name} = {dev}")

    # a chain of 20-minute meetings: A-B, B-C, ..., E-F
    for left, right in zip(names, names[1:]):
        meet(svc, devices[left], devices[right], T0 + 3600.0, 20)

    # plus one meeting that is too short to qualify
    meet(svc, devices["A"], devices["F"], T0 + 50000.0, 8)

    graph = svc.graph_snapshot(T0 + DAY)
    print(f"\nedges after one day ({graph.edge_count()}):")
    print(graph.dump_edges())

    print("network distances from A:")
    dists = graph.distances_from([devices["A"]])
    for name in names:
        print(f"  A -> {name}: {dists.get(devices[name], 'BEYOND')}")

    print("\nuser-count-by-distance chart for A (distances 1..12):")
    print(f"  {graph.user_count_histogram(devices['A'])}")


if __name__ == "__main__":
    main()
