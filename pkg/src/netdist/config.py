"""Scenario configuration: one JSON document drives the server, the matcher
and the simulation testbed.

Every knob has a default; a scenario file only overrides what it cares about.
Unknown keys are rejected so typos fail loudly instead of silently running a
different experiment.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    """Raised for unreadable, unparsable or unknown-key scenario files."""


def _build(cls, data: dict, path: str):
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown config key {path}.{key}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        if hasattr(f.type, "__dataclass_fields__") or f.name in _SECTION_TYPES:
            section_cls = _SECTION_TYPES[f.name]
            if not isinstance(value, dict):
                raise ConfigError(f"{path}.{f.name} must be an object")
            value = _build(section_cls, value, f"{path}.{f.name}")
        kwargs[f.name] = value
    return cls(**kwargs)


@dataclass
class IngestConfig:
    proximity_seconds: float = 15 * 60.0       # accumulated <=10 m co-presence for an edge
    wifi_seconds: float = 3 * 3600.0           # accumulated same-AP co-presence for an edge
    max_distance_m: float = 10.0
    rssi_cutoff_db: float = -75.0              # BLE-only records count as near iff rssi >= cutoff
    stitch_gap_seconds: float = 5 * 60.0       # merge consecutive detections into one interval
    wifi_stitch_gap_seconds: float = 10 * 60.0  # wider: bridges temp-id rotation between scans
    pair_tolerance_seconds: float = 120.0      # mirror records join within this skew
    horizon_days: float = 14.0                 # reject detections older than this
    future_skew_seconds: float = 120.0         # reject detections further in the future


@dataclass
class GraphConfig:
    window_days: float = 14.0
    max_depth: int = 12


@dataclass
class WifiMatcherConfig:
    epoch_seconds: float = 20 * 60.0           # temp-id stability window, under one hour
    retention_seconds: float = 0.0             # 0 = destroy round inputs at close; max 4 h
    round_interval_seconds: float = 5 * 60.0   # pair-report variant: cadence of round closing
    variant: str = "temp_id"                   # "temp_id" or "pair_report"

    def __post_init__(self):
        if self.variant not in ("temp_id", "pair_report"):
            raise ConfigError(f"wifi_matcher.variant must be temp_id or pair_report, got {self.variant!r}")
        if self.epoch_seconds >= 3600.0:
            raise ConfigError("wifi_matcher.epoch_seconds must stay under one hour")
        if self.retention_seconds > 4 * 3600.0:
            raise ConfigError("wifi_matcher.retention_seconds capped at 4 hours")


@dataclass
class TokenConfig:
    validity_hours: float = 72.0
    allow_unauthenticated: bool = False
    authorities: dict = field(default_factory=dict)  # authority id -> shared secret


@dataclass
class ChartConfig:
    fade_days: float = 10.0


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8470
    data_dir: str = ""                          # empty = in-memory only
    matcher_secret: str = "matcher-secret"
    fsync: bool = False


@dataclass
class PopulationConfig:
    size: int = 1000
    household_size: int = 4
    occupation_count: int = 10
    occupation_k: int = 10                      # ring-lattice neighbours per member
    occupation_beta: float = 0.1                # rewiring probability
    occupation_coverage: float = 1.0            # fraction of people assigned to occupations
    random_contact_rate: float = 0.5            # expected random contacts per person per day
    random_long_fraction: float = 1.0           # fraction of random contacts long enough to qualify


@dataclass
class EpiConfig:
    transmission_prob: float = 0.06
    latent_days: int = 3
    infectious_days: int = 7
    initial_seeds: int = 5


@dataclass
class BehaviorConfig:
    precaution_prob: float = 0.5       # alerted person actually takes precautions
    block_prob: float = 0.5            # a precaution stops one would-be transmission
    inform_prob: float = 0.0           # alerted user tells each household/occupation neighbour
    alert_distance: int = 3
    precaution_days: int = 14
    report_prob: float = 0.5           # infected adopter redeems a positive token on symptom day
    contact_token_prob: float = 0.0    # household members get and redeem contact tokens


@dataclass
class AdoptionConfig:
    rate: float = 0.4
    correlated: bool = False           # snowball sampling along edges instead of uniform


@dataclass
class SimConfig:
    days: int = 60
    scans_per_contact: int = 4         # detection scans emitted per qualifying contact
    scan_span_seconds: float = 15 * 60.0


@dataclass
class ExperimentsConfig:
    run: list = field(default_factory=list)     # subset of the four experiment names
    adoption_sweep: list = field(default_factory=lambda: [0.02, 0.05, 0.08, 0.10, 0.12, 0.15, 0.25])
    precaution_sweep: list = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    distortion_adoptions: list = field(default_factory=lambda: [0.25, 0.5, 0.75])
    replicates: int = 30
    distortion_pairs: int = 10000
    distortion_cases: int = 100


_SECTION_TYPES = {
    "ingest": IngestConfig,
    "graph": GraphConfig,
    "wifi_matcher": WifiMatcherConfig,
    "tokens": TokenConfig,
    "chart": ChartConfig,
    "server": ServerConfig,
    "population": PopulationConfig,
    "epi": EpiConfig,
    "behavior": BehaviorConfig,
    "adoption": AdoptionConfig,
    "sim": SimConfig,
    "experiments": ExperimentsConfig,
}


@dataclass
class Config:
    ingest: IngestConfig = field(default_factory=IngestConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    wifi_matcher: WifiMatcherConfig = field(default_factory=WifiMatcherConfig)
    tokens: TokenConfig = field(default_factory=TokenConfig)
    chart: ChartConfig = field(default_factory=ChartConfig)
    server: ServerConfig = field(default_factory=ServerConfig)
    population: PopulationConfig = field(default_factory=PopulationConfig)
    epi: EpiConfig = field(default_factory=EpiConfig)
    behavior: BehaviorConfig = field(default_factory=BehaviorConfig)
    adoption: AdoptionConfig = field(default_factory=AdoptionConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    experiments: ExperimentsConfig = field(default_factory=ExperimentsConfig)
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        return _build(cls, data, "config")

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path: str | Path) -> Config:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {p} must contain a JSON object")
    return Config.from_dict(data)
