"""Synthetic population structure: households that interact fully every day,
overlaid with small-world occupation networks and daily random mixing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import PopulationConfig
from ..util import derive_seed


class InfeasibleConfig(ValueError):
    """Population parameters that cannot produce a valid world."""


def watts_strogatz(members: list[int], k: int, beta: float,
                   rng: np.random.Generator) -> set[tuple[int, int]]:
    """Small-world graph over the given member ids.

    Starts from a ring lattice where everyone connects to the k/2 nearest
    neighbours on each side, then rewires each edge's far endpoint with
    probability beta. Edge count is preserved; beta=0 keeps the pure lattice,
    beta=1 approaches a random graph of the same density.
    """
    n = len(members)
    if k % 2 != 0 or k < 2:
        raise InfeasibleConfig(f"ring degree k must be even and >= 2, got {k}")
    if k >= n:
        raise InfeasibleConfig(f"ring degree k={k} must be below the group size {n}")
    if not 0.0 <= beta <= 1.0:
        raise InfeasibleConfig(f"rewiring probability must be in [0, 1], got {beta}")

    edges: set[tuple[int, int]] = set()
    half = k // 2
    for i in range(n):
        for j in range(1, half + 1):
            a, b = i, (i + j) % n
            edges.add((min(a, b), max(a, b)))

    for i in range(n):
        for j in range(1, half + 1):
            a, b = i, (i + j) % n
            key = (min(a, b), max(a, b))
            if key not in edges:
                continue  # already rewired away
            if rng.random() >= beta:
                continue
            for _ in range(4 * n):
                c = int(rng.integers(n))
                new = (min(i, c), max(i, c))
                if c != i and new not in edges:
                    edges.remove(key)
                    edges.add(new)
                    break

    return {(members[a], members[b]) for a, b in edges}


@dataclass
class SimWorld:
    """Static population structure; dynamic epidemic state lives in Simulation."""

    n: int
    households: list[list[int]]
    household_of: np.ndarray
    occupation_nets: list[dict]            # {"members": [...], "edges": set}
    household_pairs: np.ndarray            # (m, 2) all within-household pairs
    occupation_edges: np.ndarray           # (m, 2) all occupation edges
    seed: int
    neighbor_sets: list[set] = field(default_factory=list)  # household+occupation

    def household_members(self, person: int) -> list[int]:
        return self.households[self.household_of[person]]


def generate_world(pop: PopulationConfig, seed: int) -> SimWorld:
    """Deterministic world for a given seed: sequential household blocks and
    shuffled occupation assignment with per-net small-world wiring."""
    n = pop.size
    if n < 2:
        raise InfeasibleConfig("population must have at least 2 people")
    if pop.household_size < 1:
        raise InfeasibleConfig("household_size must be >= 1")

    rng = np.random.default_rng(derive_seed(seed, "world"))

    households = [list(range(i, min(i + pop.household_size, n)))
                  for i in range(0, n, pop.household_size)]
    household_of = np.empty(n, dtype=np.int32)
    for idx, hh in enumerate(households):
        for p in hh:
            household_of[p] = idx

    hh_pairs = []
    for hh in households:
        for i in range(len(hh)):
            for j in range(i + 1, len(hh)):
                hh_pairs.append((hh[i], hh[j]))
    household_pairs = np.array(hh_pairs, dtype=np.int32) if hh_pairs else np.empty((0, 2), np.int32)

    occupation_nets: list[dict] = []
    occ_edges: list[tuple[int, int]] = []
    if pop.occupation_count > 0 and pop.occupation_coverage > 0:
        pool = rng.permutation(n)[: int(round(n * pop.occupation_coverage))]
        groups = np.array_split(pool, pop.occupation_count)
        for grp in groups:
            members = [int(x) for x in grp]
            if len(members) <= pop.occupation_k:
                raise InfeasibleConfig(
                    f"occupation size {len(members)} too small for k={pop.occupation_k}")
            edges = watts_strogatz(members, pop.occupation_k, pop.occupation_beta, rng)
            occupation_nets.append({"members": members, "edges": edges})
            occ_edges.extend(edges)
    occupation_edges = np.array(sorted(occ_edges), dtype=np.int32) if occ_edges \
        else np.empty((0, 2), np.int32)

    neighbor_sets: list[set] = [set() for _ in range(n)]
    for a, b in hh_pairs:
        neighbor_sets[a].add(b)
        neighbor_sets[b].add(a)
    for a, b in occ_edges:
        neighbor_sets[a].add(b)
        neighbor_sets[b].add(a)

    return SimWorld(n=n, households=households, household_of=household_of,
                    occupation_nets=occupation_nets, household_pairs=household_pairs,
                    occupation_edges=occupation_edges, seed=seed,
                    neighbor_sets=neighbor_sets)
