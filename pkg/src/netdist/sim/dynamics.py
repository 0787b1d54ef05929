"""Daily-step epidemic dynamics wired into the real signal service.

Each simulated day: fixed-stage SEIR transitions, contact sampling (household
pairs daily, half the occupation edges, Poisson random mixing), transmission
with precaution blocking, synthetic detection records for qualifying contacts
between app adopters (through the production ingest pipeline, not a parallel
graph), token redemption by newly symptomatic adopters, and chart-driven
behavior responses.

Every stochastic decision draws from a keyed hash of (seed, purpose, actors,
day) instead of a shared RNG stream, so paired runs that differ only in
behavior parameters stay aligned on identical epidemics (common random
numbers): with the precaution response turned off, a run reproduces its
baseline bit-exactly.
"""

from __future__ import annotations

from datetime import datetime, timezone

import numpy as np

from ..config import Config
from ..ingest import BLE, DetectionRecord
from ..reporting import CONTACT, POSITIVE
from ..service import SignalService
from ..util import DAY_S, derive_seed, unit_hash
from .world import InfeasibleConfig, SimWorld

SIM_EPOCH = 18000 * 86400.0  # a fixed UTC midnight; all sim time is relative to it

S, E, I, R = 0, 1, 2, 3

HOUSEHOLD, OCCUPATION, RANDOM = 0, 1, 2


def day_timestamp(day: int) -> float:
    return SIM_EPOCH + day * DAY_S


def day_date(day: int):
    return datetime.fromtimestamp(day_timestamp(day), tz=timezone.utc).date()


class ContactSampler:
    """Deterministic per-day contact sets for one world.

    Households contribute every pair every day; each occupation edge is
    active on a given day with probability one half; random mixing adds a
    Poisson number of uniform pairs. The same (seed, day) always yields the
    same contacts, independent of anything the epidemic does.
    """

    def __init__(self, world: SimWorld, random_contact_rate: float,
                 random_long_fraction: float, seed: int):
        self.world = world
        self.random_contact_rate = random_contact_rate
        self.random_long_fraction = random_long_fraction
        self.seed = seed

    def contacts_for_day(self, day: int):
        """Returns (pairs[m,2], context[m], long_mask[m]) arrays."""
        rng = np.random.default_rng(derive_seed(self.seed, "contacts", day))
        parts, ctxs, longs = [], [], []

        hh = self.world.household_pairs
        if len(hh):
            parts.append(hh)
            ctxs.append(np.full(len(hh), HOUSEHOLD, np.int8))
            longs.append(np.ones(len(hh), bool))

        occ = self.world.occupation_edges
        if len(occ):
            active = rng.random(len(occ)) < 0.5
            chosen = occ[active]
            parts.append(chosen)
            ctxs.append(np.full(len(chosen), OCCUPATION, np.int8))
            longs.append(np.ones(len(chosen), bool))

        expected = self.world.n * self.random_contact_rate / 2.0
        count = int(rng.poisson(expected)) if expected > 0 else 0
        if count:
            raw = rng.integers(0, self.world.n, size=(count, 2)).astype(np.int32)
            raw = raw[raw[:, 0] != raw[:, 1]]
            parts.append(raw)
            ctxs.append(np.full(len(raw), RANDOM, np.int8))
            longs.append(rng.random(len(raw)) < self.random_long_fraction)

        if not parts:
            empty = np.empty((0, 2), np.int32)
            return empty, np.empty(0, np.int8), np.empty(0, bool)
        return (np.concatenate(parts), np.concatenate(ctxs), np.concatenate(longs))


def sample_adopters(world: SimWorld, rate: float, correlated: bool,
                    rng: np.random.Generator) -> set[int]:
    """Adopter set at the target rate; optionally clustered along the
    household/occupation structure (snowball growth from a few seeds)."""
    target = int(round(world.n * rate))
    if target <= 0:
        return set()
    if not correlated:
        return {int(p) for p in rng.choice(world.n, size=target, replace=False)}

    adopted: set[int] = set()
    frontier: set[int] = set()
    seeds = max(1, target // 10)
    for p in rng.choice(world.n, size=seeds, replace=False):
        adopted.add(int(p))
        frontier.update(world.neighbor_sets[int(p)])
    while len(adopted) < target:
        frontier -= adopted
        if frontier:
            pick = sorted(frontier)[int(rng.integers(len(frontier)))]
        else:
            remaining = sorted(set(range(world.n)) - adopted)
            pick = remaining[int(rng.integers(len(remaining)))]
        adopted.add(pick)
        frontier.update(world.neighbor_sets[pick])
    return adopted


class Simulation:
    """One deterministic replicate: a world, an epidemic, and a live service."""

    def __init__(self, world: SimWorld, config: Config, seed: int | None = None,
                 record_trace: bool = False, adopters: set[int] | None = None):
        self.world = world
        self.config = config
        self.seed = config.seed if seed is None else seed
        self.record_trace = record_trace

        simc = config.sim
        if simc.scans_per_contact < 2:
            raise InfeasibleConfig("scans_per_contact must be >= 2 to span an interval")
        scan_step = simc.scan_span_seconds / (simc.scans_per_contact - 1)
        if scan_step > config.ingest.stitch_gap_seconds:
            raise InfeasibleConfig(
                "scan spacing exceeds the ingest stitch gap; detections would never "
                "form intervals (raise ingest.stitch_gap_seconds or scans_per_contact)")

        self.sampler = ContactSampler(world, config.population.random_contact_rate,
                                      config.population.random_long_fraction,
                                      derive_seed(self.seed, "sampler"))

        n = world.n
        self.day = 0
        self.state = np.zeros(n, np.int8)
        self.exposed_day = np.full(n, -10 ** 6, np.int32)
        self.symptom_day = np.full(n, -10 ** 6, np.int32)
        self.precaution_until = np.zeros(n, np.int32)   # exclusive day bound
        self.offspring = np.zeros(n, np.int32)
        self.ever_infected = np.zeros(n, bool)
        self.informed_distance: dict[int, int] = {}
        self.blocked_events: list[tuple[int, int, int]] = []
        self.averted_first_order = 0
        self.daily: list[dict] = []
        self.trace: list[dict] = []
        self._alert_seen: dict[int, int] = {}

        if adopters is None:
            adopt_rng = np.random.default_rng(derive_seed(self.seed, "adoption"))
            adopters = sample_adopters(world, config.adoption.rate,
                                       config.adoption.correlated, adopt_rng)
        self.adopters = set(adopters)
        self.adopter_mask = np.zeros(n, bool)
        if self.adopters:
            self.adopter_mask[sorted(self.adopters)] = True

        config.tokens.authorities.setdefault("sim", "sim-secret")
        self._authority_secret = config.tokens.authorities["sim"]
        self._now = SIM_EPOCH
        self.service = SignalService(config, data_dir=None, clock=lambda: self._now)
        self.devices: dict[int, str] = {}
        for p in sorted(self.adopters):
            self.devices[p] = self.service.register_device(community="sim", ts=SIM_EPOCH)

        case_rng = np.random.default_rng(derive_seed(self.seed, "index-cases"))
        for p in case_rng.choice(n, size=min(config.epi.initial_seeds, n), replace=False):
            self.state[p] = E
            self.exposed_day[p] = 0
            self.ever_infected[p] = True

    # -- one day ---------------------------------------------------------------

    def step_day(self) -> None:
        day = self.day
        day_ts = day_timestamp(day)
        epi, beh = self.config.epi, self.config.behavior

        # stage transitions at day start
        newly_symptomatic = np.where((self.state == E)
                                     & (day - self.exposed_day >= epi.latent_days))[0]
        self.state[newly_symptomatic] = I
        self.symptom_day[newly_symptomatic] = day
        recovered = np.where((self.state == I)
                             & (day - self.symptom_day >= epi.infectious_days))[0]
        self.state[recovered] = R

        pairs, ctx, long_mask = self.sampler.contacts_for_day(day)

        exposed_today, blocked_today, attempts = self._transmit(pairs, day)

        self._feed_detections(pairs, long_mask, day, day_ts)
        reports = self._report_cases(newly_symptomatic, day, day_ts)
        alerts = self._behavior_responses(day, day_ts)

        averted = {dst for _, _, dst in blocked_today if dst not in exposed_today}
        self.averted_first_order += len(averted)
        self.blocked_events.extend(blocked_today)

        counts = np.bincount(self.state, minlength=4)
        self.daily.append({
            "day": day, "s": int(counts[S]), "e": int(counts[E]),
            "i": int(counts[I]), "r": int(counts[R]),
            "new_exposed": len(exposed_today), "blocked": len(blocked_today),
            "averted_first_order": len(averted), "reports": reports, "alerts": alerts,
        })
        if self.record_trace:
            self.trace.append({"day": day, "attempts": attempts,
                               "blocked": list(blocked_today),
                               "exposed": sorted(exposed_today)})
        self.day += 1

    def _transmit(self, pairs, day: int):
        epi, beh = self.config.epi, self.config.behavior
        exposed_today: set[int] = set()
        blocked_today: list[tuple[int, int, int]] = []
        attempts: list[tuple[int, int, bool]] = []

        if len(pairs) == 0 or epi.transmission_prob <= 0:
            return exposed_today, blocked_today, attempts

        sa = self.state[pairs[:, 0]]
        sb = self.state[pairs[:, 1]]
        cand = ((sa == I) & (sb == S)) | ((sa == S) & (sb == I))
        processed: set[tuple[int, int]] = set()
        for a, b in pairs[cand]:
            a, b = int(a), int(b)
            key = (a, b) if a < b else (b, a)
            if key in processed:
                continue
            processed.add(key)
            src, dst = (a, b) if self.state[a] == I else (b, a)
            if dst in exposed_today:
                continue
            if unit_hash(self.seed, "tx", day, *key) >= epi.transmission_prob:
                continue
            protected = (self.precaution_until[src] > day
                         or self.precaution_until[dst] > day)
            if protected and unit_hash(self.seed, "block", day, *key) < beh.block_prob:
                blocked_today.append((day, src, dst))
                if self.record_trace:
                    attempts.append((src, dst, False))
                continue
            exposed_today.add(dst)
            self.state[dst] = E
            self.exposed_day[dst] = day
            self.ever_infected[dst] = True
            self.offspring[src] += 1
            if self.record_trace:
                attempts.append((src, dst, True))
        return exposed_today, blocked_today, attempts

    def _feed_detections(self, pairs, long_mask, day: int, day_ts: float) -> None:
        """Qualifying contacts between two adopters hit the real ingest path."""
        if len(pairs) == 0 or not self.adopters:
            return
        feed = long_mask & self.adopter_mask[pairs[:, 0]] & self.adopter_mask[pairs[:, 1]]
        if not feed.any():
            return
        self._now = day_ts + DAY_S - 1.0
        simc = self.config.sim
        scans = simc.scans_per_contact
        step = simc.scan_span_seconds / (scans - 1)
        done: set[tuple[int, int]] = set()
        for a, b in pairs[feed]:
            a, b = int(a), int(b)
            key = (a, b) if a < b else (b, a)
            if key in done:
                continue
            done.add(key)
            start = day_ts + 8 * 3600.0 + unit_hash(self.seed, "slot", day, *key) * 8 * 3600.0
            dev_a, dev_b = self.devices[a], self.devices[b]
            for idx in range(scans):
                ts = start + idx * step
                token = f"e{day}-{key[0]}-{key[1]}-{idx}"
                for dev in (dev_a, dev_b):
                    self.service.ingest_detection(
                        DetectionRecord(reporter=dev, channel=BLE, timestamp=ts,
                                        peer_temp_id=token, rssi=-55.0),
                        now=self._now)

    def _report_cases(self, newly_symptomatic, day: int, day_ts: float) -> int:
        beh = self.config.behavior
        reports = 0
        t_report = day_ts + 20 * 3600.0  # one shared evening slot per day
        contact_redeemers: list[int] = []
        for p in sorted(int(x) for x in newly_symptomatic):
            if p not in self.adopters:
                continue
            if unit_hash(self.seed, "report", p) >= beh.report_prob:
                continue
            self._now = max(self._now, t_report)
            issued = self.service.issue_tokens("sim", self._authority_secret,
                                               POSITIVE, 1, now=t_report)
            self.service.redeem_token(issued[0].token, self.devices[p],
                                      day_date(self.symptom_day[p]), now=t_report)
            reports += 1
            if beh.contact_token_prob > 0:
                for m in self.world.household_members(p):
                    if m == p or m not in self.adopters:
                        continue
                    if unit_hash(self.seed, "contact-token", p, m) < beh.contact_token_prob:
                        contact_redeemers.append(m)
        t_contact = t_report + 600.0
        for m in contact_redeemers:
            self._now = max(self._now, t_contact)
            ct = self.service.issue_tokens("sim", self._authority_secret,
                                           CONTACT, 1, now=t_contact)
            self.service.redeem_token(ct[0].token, self.devices[m], None, now=t_contact)
            reports += 1
        return reports

    def _behavior_responses(self, day: int, day_ts: float) -> int:
        beh = self.config.behavior
        if not self.adopters or (beh.precaution_prob <= 0 and beh.inform_prob <= 0):
            return 0
        t_eval = day_ts + 22 * 3600.0
        self._now = max(self._now, t_eval)
        engine = self.service.charts
        newly_alerted = 0
        for p in sorted(self.adopters):
            dev = self.devices[p]
            active = sum(1 for sig in engine.signals_for(dev)
                         if sig.active_at(t_eval) and sig.distance <= beh.alert_distance)
            seen = self._alert_seen.get(p, 0)
            self._alert_seen[p] = active
            if active <= seen:
                continue  # an alert event is a new signal arriving within range
            newly_alerted += 1
            if unit_hash(self.seed, "precaution", p, day) < beh.precaution_prob:
                self.precaution_until[p] = max(self.precaution_until[p],
                                               day + 1 + beh.precaution_days)
            if beh.inform_prob > 0:
                d_min = engine.min_active_distance(dev, t_eval)
                for m in sorted(self.world.neighbor_sets[p]):
                    if unit_hash(self.seed, "inform", p, m, day) >= beh.inform_prob:
                        continue
                    implied = (d_min or beh.alert_distance) + 1
                    prev = self.informed_distance.get(m)
                    self.informed_distance[m] = implied if prev is None else min(prev, implied)
                    if unit_hash(self.seed, "informed-precaution", m, day) < beh.precaution_prob:
                        self.precaution_until[m] = max(self.precaution_until[m],
                                                       day + 1 + beh.precaution_days)
        return newly_alerted

    # -- runs and summaries ------------------------------------------------------

    def run(self, days: int | None = None) -> "Simulation":
        for _ in range(self.config.sim.days if days is None else days):
            self.step_day()
        return self

    def attack_rate(self) -> float:
        return float(self.ever_infected.mean())

    def r_eff_measured(self) -> float:
        """Mean secondary infections per completed case."""
        completed = self.state == R
        if not completed.any():
            return 0.0
        return float(self.offspring[completed].mean())

    def seir_counts(self) -> tuple[int, int, int, int]:
        counts = np.bincount(self.state, minlength=4)
        return int(counts[S]), int(counts[E]), int(counts[I]), int(counts[R])
