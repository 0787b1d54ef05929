"""netdist: pre-exposure notification over a pseudonymous contact graph.

Instead of notifying only direct contacts of a new case, every user is told
the network distance at which each case struck, on a per-user chart that
animates over time. The package provides the full server pipeline (sensor
ingestion, sliding-window contact graph, truncated distance queries, one-time
token case labeling, split-trust Wi-Fi matching) and an agent-based epidemic
testbed that exercises those production code paths at desk scale.
"""

__version__ = "0.1.0"

from .config import Config, ConfigError, load_config
from .graph import BEYOND, ContactGraph, multi_source_distances, snapshot
from .ingest import (BLE, ULTRASOUND, WIFI, CoPresenceInterval, ContactEdge,
                     DetectionRecord, DeviceRegistry, IngestPipeline,
                     IngestRejected, UnknownDeviceError, derive_edges)
from .charts import CaseChart, ChartEngine, PinnedSignal
from .reporting import (CONTACT, POSITIVE, CaseReport, CaseToken,
                        RedemptionRejected, TokenService, UnauthorizedAuthority,
                        amplification_probability)
from .service import SignalService, replay, reopen
from .wifi import (DuplicateSingleUseId, SingleUseRegistry, WifiMatcher,
                   WifiTempId, hash_bssid, match_round)

__all__ = [
    "__version__",
    "Config", "ConfigError", "load_config",
    "BEYOND", "ContactGraph", "multi_source_distances", "snapshot",
    "BLE", "ULTRASOUND", "WIFI", "CoPresenceInterval", "ContactEdge",
    "DetectionRecord", "DeviceRegistry", "IngestPipeline", "IngestRejected",
    "UnknownDeviceError", "derive_edges",
    "CaseChart", "ChartEngine", "PinnedSignal",
    "CONTACT", "POSITIVE", "CaseReport", "CaseToken", "RedemptionRejected",
    "TokenService", "UnauthorizedAuthority", "amplification_probability",
    "SignalService", "replay", "reopen",
    "DuplicateSingleUseId", "SingleUseRegistry", "WifiMatcher", "WifiTempId",
    "hash_bssid", "match_round",
]
