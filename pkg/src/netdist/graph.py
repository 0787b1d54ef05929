"""The 14-day interaction network and its truncated shortest-path queries.

A ContactGraph is an immutable snapshot: a symmetric adjacency over all
registered devices, built from the contact edges qualifying inside one
sliding window. Distances are unweighted hop counts, truncated at a cap
(12 by default); anything farther, or disconnected, is reported as BEYOND.
"""

from __future__ import annotations

import math
from collections import deque

from .config import IngestConfig
from .ingest import ContactEdge, IngestPipeline, UnknownDeviceError, derive_edges
from .util import DAY_S

#: Sentinel for "farther than the cap or not connected at all".
#: Infinity keeps min/comparison algebra simple; it is never serialized.
BEYOND = math.inf

D_MAX = 12


class ContactGraph:
    """Immutable snapshot of the interaction network as of one moment."""

    def __init__(self, nodes, edges, as_of: float, generation: int = 0,
                 window_days: float = 14.0, max_depth: int = D_MAX):
        adjacency: dict[str, set[str]] = {node: set() for node in nodes}
        for edge in edges:
            a, b = (edge.pair() if isinstance(edge, ContactEdge) else tuple(edge))
            if a == b:
                continue
            adjacency.setdefault(a, set()).add(b)
            adjacency.setdefault(b, set()).add(a)
        self._adjacency = adjacency
        self.as_of = as_of
        self.generation = generation
        self.window_days = window_days
        self.max_depth = max_depth

    # -- basic structure -----------------------------------------------------

    def __contains__(self, device: str) -> bool:
        return device in self._adjacency

    def __len__(self) -> int:
        return len(self._adjacency)

    def nodes(self) -> list[str]:
        return list(self._adjacency)

    def neighbors(self, device: str) -> frozenset[str]:
        return frozenset(self._adjacency[device])

    def degree(self, device: str) -> int:
        return len(self._adjacency[device])

    def edge_count(self) -> int:
        return sum(len(n) for n in self._adjacency.values()) // 2

    def edge_list(self) -> list[tuple[str, str]]:
        out = []
        for a, neigh in self._adjacency.items():
            for b in neigh:
                if a < b:
                    out.append((a, b))
        out.sort()
        return out

    # -- distance queries ------------------------------------------------------

    def distances_from(self, sources, max_depth: int | None = None) -> dict[str, int]:
        """Truncated multi-source BFS: hop count to the nearest source.

        Only devices within ``max_depth`` hops appear in the result; sources
        themselves map to 0.
        """
        cap = self.max_depth if max_depth is None else max_depth
        adjacency = self._adjacency
        dist: dict[str, int] = {}
        frontier = []
        for s in sources:
            if s not in adjacency:
                raise UnknownDeviceError(s)
            if s not in dist:
                dist[s] = 0
                frontier.append(s)
        depth = 0
        while frontier and depth < cap:
            depth += 1
            nxt = []
            for node in frontier:
                for nb in adjacency[node]:
                    if nb not in dist:
                        dist[nb] = depth
                        nxt.append(nb)
            frontier = nxt
        return dist

    def distance(self, frm: str, to: str):
        """Exact hop distance when it is within the cap, else BEYOND."""
        if frm not in self._adjacency:
            raise UnknownDeviceError(frm)
        if to not in self._adjacency:
            raise UnknownDeviceError(to)
        if frm == to:
            return 0
        adjacency = self._adjacency
        dist = {frm: 0}
        queue = deque([frm])
        while queue:
            node = queue.popleft()
            d = dist[node] + 1
            if d > self.max_depth:
                break
            for nb in adjacency[node]:
                if nb not in dist:
                    if nb == to:
                        return d
                    dist[nb] = d
                    queue.append(nb)
        return BEYOND

    def user_count_histogram(self, viewer: str) -> list[int]:
        """How many other users sit at each network distance 1..max_depth."""
        counts = [0] * self.max_depth
        for device, d in self.distances_from([viewer]).items():
            if 1 <= d <= self.max_depth:
                counts[d - 1] += 1
        return counts

    def largest_component_fraction(self) -> float:
        """Size of the largest connected component over the node count."""
        if not self._adjacency:
            return 0.0
        seen: set[str] = set()
        best = 0
        for start in self._adjacency:
            if start in seen:
                continue
            size = 0
            stack = [start]
            seen.add(start)
            while stack:
                node = stack.pop()
                size += 1
                for nb in self._adjacency[node]:
                    if nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
            best = max(best, size)
        return best / len(self._adjacency)

    # -- serialization ---------------------------------------------------------

    def dump_edges(self) -> str:
        """Debug dump: one ``device_a device_b`` pair per line, sorted."""
        return "".join(f"{a} {b}\n" for a, b in self.edge_list())


def multi_source_distances(graph: ContactGraph, sources) -> dict[str, int]:
    sources = list(sources)
    if not sources:
        raise ValueError("sources must be non-empty")
    return graph.distances_from(sources)


def snapshot(pipeline: IngestPipeline, as_of: float, generation: int = 0,
             window_days: float = 14.0, max_depth: int = D_MAX,
             nodes=None) -> ContactGraph:
    """Build the graph over the window ending at ``as_of`` from the event log.

    Deterministic for a fixed set of accepted records; nodes default to every
    registered device so isolated viewers still query cleanly.
    """
    window = (as_of - window_days * DAY_S, as_of)
    edges = pipeline.derive_edges(window)
    if nodes is None:
        nodes = pipeline.registry.devices()
    return ContactGraph(nodes, edges, as_of=as_of, generation=generation,
                        window_days=window_days, max_depth=max_depth)


def graph_from_intervals(intervals, as_of: float, nodes=None,
                         config: IngestConfig | None = None,
                         window_days: float = 14.0, max_depth: int = D_MAX) -> ContactGraph:
    """Convenience builder used by tests and the simulation oracles."""
    window = (as_of - window_days * DAY_S, as_of)
    edges = derive_edges(intervals, window, config)
    node_set = set(nodes or [])
    for e in edges:
        node_set.update(e.pair())
    return ContactGraph(node_set, edges, as_of=as_of,
                        window_days=window_days, max_depth=max_depth)
