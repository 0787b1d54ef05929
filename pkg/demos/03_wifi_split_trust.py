"""Split-trust Wi-Fi matching, both protocol variants, with a storage audit.

Variant 1 (temp ids): the matching entity maps a hashed access-point
fingerprint to a short-lived random identifier; devices forward only that
identifier to the main server.

Variant 2 (pair reports): devices send single-use identifiers plus the
hashed fingerprint to the matcher and announce the single-use identifier to
the main server; the matcher reports proximal pairs and then destroys its
round data.

Either way: the main server never stores fingerprint-derived data, and the
matcher never learns a device identity. The demo proves both by scanning
the two stores.

Run:  python3 demos/03_wifi_split_trust.py
"""

import json

from netdist import SignalService, hash_bssid
from netdist.config import Config
from netdist.wifi import fresh_single_use_id

DAY = 86400.0
T0 = 18000 * DAY
NOW = T0 + 7 * DAY
SALT = "deployment-salt"


def strings_in(obj, out):
    if isinstance(obj, dict):
        for k, v in obj.items():
            strings_in(k, out)
            strings_in(v, out)
    elif isinstance(obj, (list, tuple, set)):
        for v in obj:
            strings_in(v, out)
    elif isinstance(obj, str):
        out.add(obj)


def main():
    cfg = Config()
    cfg.wifi_matcher.variant = "pair_report"
    svc = SignalService(cfg, clock=lambda: NOW)
    home = svc.register_device(ts=T0)
    mate = svc.register_device(ts=T0)
    digest = hash_bssid("9c:3d:cf:11:22:33", SALT)
    print(f"hashed access point fingerprint: {digest[:24]}...")

    print("\nvariant 1: temp-id issuance")
    temp1 = svc.wifi_resolve(digest, now=NOW - 4 * 3600)
    temp2 = svc.wifi_resolve(digest, now=NOW - 4 * 3600 + 300)
    temp3 = svc.wifi_resolve(digest, now=NOW - 3600)
    print(f"  same epoch:  {temp1.id} == {temp2.id}: {temp1.id == temp2.id}")
    print(f"  later epoch: {temp1.id} != {temp3.id}: {temp1.id != temp3.id}")

    print("\nvariant 2: overnight on the same access point, rounds every 5 min")
    t = NOW - 4 * 3600
    rounds = pair_hits = 0
    while t < NOW:
        for dev in (home, mate):
            sid = fresh_single_use_id()
            svc.wifi_submit(sid, digest, t)
            svc.wifi_announce(sid, dev, t)
        pair_hits += len(svc.wifi_close_round(now=t + 30))
        rounds += 1
        t += 300.0
    print(f"  {rounds} rounds closed, {pair_hits} proximal pair observations")

    graph = svc.graph_snapshot(NOW)
    print(f"  network distance home<->mate after 4 shared hours: "
          f"{graph.distance(home, mate)}")

    print("\nstorage audit")
    main_strings, matcher_strings = set(), set()
    strings_in(svc.storage_snapshot(), main_strings)
    strings_in(svc.matcher.storage_snapshot(), matcher_strings)
    print(f"  fingerprint digest in main-server storage: {digest in main_strings}")
    print(f"  device ids in matcher storage: "
          f"{bool({home, mate} & matcher_strings)}")
    print(f"  matcher round buffers after close: "
          f"{json.dumps(svc.matcher.storage_snapshot()['round'])}")


if __name__ == "__main__":
    main()
