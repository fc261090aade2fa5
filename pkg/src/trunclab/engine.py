"""Sampling, clustering, and event estimation over graph windows.

Per-trial randomness follows the stream contract in :mod:`trunclab.rng`:
the uniform for edge ``e`` of trial ``t`` is a pure function of
``(seed, t, e)`` (indexed mode) or of ``(seed, t, edge key)`` (keyed mode),
so estimates cannot depend on trial execution order and the same lattice
edge can be coupled across different windows.

Connectivity is computed two ways.  :func:`sample_and_cluster` builds an
explicit union-find forest, the reference route that tests compare against
breadth-first search.  The batch estimators delegate the same question to
``scipy.sparse.csgraph.connected_components`` (or, for small windows, to a
vectorized label-propagation sweep that handles many trials at once); a
route-agreement test pins all of them to the union-find answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .rng import (
    INDEXED_STREAM_RULE,
    indexed_uniform_matrix,
    indexed_uniforms,
    keyed_uniforms,
)
from .windows import GraphWindow

# Event descriptors are "crossing", "origin_boundary", or ("pair", i, j)
# with i, j vertex indices.

MAX_EXACT_EDGES = 22


class EnumerationLimitError(Exception):
    """Exact enumeration refused: the window exceeds the 2^22-configuration bound."""


class UnionFind:
    """Disjoint-set forest with union by rank and path compression."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    def labels(self) -> np.ndarray:
        """Canonical component label (root index) per element."""
        return np.array([self.find(i) for i in range(len(self.parent))], dtype=np.int64)


@dataclass
class ClusterState:
    """One sampled configuration: open-edge mask plus its union-find forest."""

    window: GraphWindow
    open_mask: np.ndarray
    forest: UnionFind

    def same_component(self, a: int, b: int) -> bool:
        return self.forest.connected(a, b)

    def component_members(self, vertex: int) -> np.ndarray:
        labels = self.forest.labels()
        return np.nonzero(labels == labels[vertex])[0]

    def open_edge_count(self) -> int:
        return int(self.open_mask.sum())


def trial_open_mask(window: GraphWindow, master_seed: int, trial_index: int, keyed: bool = False) -> np.ndarray:
    """Open/closed state of every edge for one trial (edge open iff u < p)."""
    if keyed:
        if window.edge_keys is None:
            raise ValueError(f"window family {window.family!r} carries no edge keys")
        uniforms = keyed_uniforms(window.edge_keys, master_seed, trial_index)
    else:
        uniforms = indexed_uniforms(window.n_edges, master_seed, trial_index)
    return uniforms < window.probs


def sample_and_cluster(
    window: GraphWindow,
    master_seed: int,
    trial_index: int,
    keyed: bool = False,
) -> ClusterState:
    """Sample one configuration and build its union-find forest."""
    open_mask = trial_open_mask(window, master_seed, trial_index, keyed=keyed)
    forest = UnionFind(window.n_vertices)
    for e in np.nonzero(open_mask)[0]:
        forest.union(int(window.edges_u[e]), int(window.edges_v[e]))
    return ClusterState(window, open_mask, forest)


def component_labels(window: GraphWindow, open_mask: np.ndarray) -> np.ndarray:
    """Component label per vertex of the open subgraph (scipy route)."""
    open_idx = np.nonzero(open_mask)[0]
    n = window.n_vertices
    if open_idx.size == 0:
        return np.arange(n, dtype=np.int32)
    matrix = coo_matrix(
        (np.ones(open_idx.size, dtype=np.int8), (window.edges_u[open_idx], window.edges_v[open_idx])),
        shape=(n, n),
    )
    return connected_components(matrix, directed=False)[1]


def propagation_labels(
    n_vertices: int,
    edges_u: np.ndarray,
    edges_v: np.ndarray,
    open_matrix: np.ndarray,
) -> np.ndarray:
    """Component labels for a whole batch of configurations at once.

    ``open_matrix`` is boolean with shape ``(batch, n_edges)``.  Minimum-label
    propagation sweeps every edge until no label changes; for the small
    windows this is used on, a handful of sweeps suffice.
    """
    batch = open_matrix.shape[0]
    labels = np.broadcast_to(np.arange(n_vertices, dtype=np.int32), (batch, n_vertices)).copy()
    rows = np.arange(batch)
    while True:
        changed = False
        for e in range(edges_u.shape[0]):
            mask = open_matrix[:, e]
            if not mask.any():
                continue
            lu = labels[:, edges_u[e]]
            lv = labels[:, edges_v[e]]
            low = np.minimum(lu, lv)
            update = mask & ((lu != low) | (lv != low))
            if update.any():
                changed = True
                idx = rows[update]
                labels[idx, edges_u[e]] = low[update]
                labels[idx, edges_v[e]] = low[update]
        if not changed:
            return labels


def _connected_single(labels: np.ndarray, left: np.ndarray, right: np.ndarray) -> bool:
    """Does any left vertex share a component label with a right vertex."""
    return np.intersect1d(labels[left], labels[right]).size > 0


def _connected_batch(labels: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Batch version over ``(batch, n_vertices)`` label rows; terminal sets are small."""
    hit = np.zeros(labels.shape[0], dtype=bool)
    for s in left:
        for t in right:
            hit |= labels[:, s] == labels[:, t]
    return hit


def event_terminals(window: GraphWindow, event) -> tuple[np.ndarray, np.ndarray]:
    """Resolve an event descriptor to its two terminal vertex sets."""
    if event == "crossing":
        try:
            return window.terminals["left"], window.terminals["right"]
        except KeyError:
            raise ValueError("window has no crossing terminals") from None
    if event == "origin_boundary":
        if window.origin_index is None or "boundary" not in window.terminals:
            raise ValueError("window has no origin/boundary terminals")
        return window.terminals["origin"], window.terminals["boundary"]
    if isinstance(event, tuple) and len(event) == 3 and event[0] == "pair":
        return (
            np.array([event[1]], dtype=np.int64),
            np.array([event[2]], dtype=np.int64),
        )
    raise ValueError(f"unknown event descriptor {event!r}")


def binomial_half_width(value: float, trials: int) -> float:
    """95% normal-approximation half-width of a Bernoulli mean."""
    return 1.96 * math.sqrt(value * (1.0 - value) / trials)


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo point estimate with trial count and seed provenance."""

    value: float
    trials: int
    successes: int
    half_width: float
    seed: int
    stream_rule: str
    label: str = ""

    def as_row(self) -> dict:
        return {
            "label": self.label,
            "value": repr(self.value),
            "half_width": repr(self.half_width),
            "trials": self.trials,
            "successes": self.successes,
            "seed": self.seed,
            "stream_rule": self.stream_rule,
        }


def _make_estimate(successes: int, trials: int, seed: int, rule: str, label: str) -> Estimate:
    value = successes / trials if trials else 0.0
    return Estimate(
        value=value,
        trials=trials,
        successes=int(successes),
        half_width=binomial_half_width(value, trials) if trials else 0.0,
        seed=seed,
        stream_rule=rule,
        label=label,
    )


# Below this many uniforms per batch the whole trial block is generated and
# clustered at once; larger jobs fall back to a per-trial loop.
_BATCH_UNIFORM_LIMIT = 40_000_000
_BATCH_LABEL_LIMIT = 60  # max edges for the label-propagation batch route


def mc_event_probability(
    window: GraphWindow,
    event,
    trials: int,
    master_seed: int,
    label: str = "",
) -> Estimate:
    """Monte Carlo probability of an event under independent edge sampling."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    left, right = event_terminals(window, event)
    successes = 0
    if (
        window.n_edges <= _BATCH_LABEL_LIMIT
        and trials * max(window.n_vertices, window.n_edges) <= _BATCH_UNIFORM_LIMIT
    ):
        uniforms = indexed_uniform_matrix(window.n_edges, master_seed, trials)
        open_matrix = uniforms < window.probs
        labels = propagation_labels(window.n_vertices, window.edges_u, window.edges_v, open_matrix)
        successes = int(_connected_batch(labels, left, right).sum())
    else:
        for trial in range(trials):
            open_mask = trial_open_mask(window, master_seed, trial)
            labels = component_labels(window, open_mask)
            if _connected_single(labels, left, right):
                successes += 1
    return _make_estimate(successes, trials, master_seed, INDEXED_STREAM_RULE, label)


def crossing_estimate(
    window: GraphWindow,
    trials: int,
    master_seed: int,
    label: str = "",
) -> Estimate:
    return mc_event_probability(window, "crossing", trials, master_seed, label=label)


def origin_boundary_estimate(
    window: GraphWindow,
    trials: int,
    master_seed: int,
    label: str = "",
) -> Estimate:
    """Fraction of trials in which the origin's cluster touches the boundary set."""
    if window.origin_index is None:
        raise ValueError("window has no origin vertex")
    return mc_event_probability(window, "origin_boundary", trials, master_seed, label=label)


def origin_radius_profile(
    window: GraphWindow,
    radii: list[int],
    trials: int,
    master_seed: int,
    label: str = "",
) -> tuple[list[Estimate], np.ndarray]:
    """Shared-trial estimates of reaching sup-norm distance >= r for several r.

    All radii are evaluated on the same sampled configurations, so the
    per-trial indicator matrix (second return value) is nonincreasing along
    the radius axis by construction; the estimates inherit exact monotone
    coupling rather than merely statistical ordering.
    """
    if window.origin_index is None:
        raise ValueError("window has no origin vertex")
    radii = list(radii)
    norms = np.abs(window.coords).max(axis=1)
    indicators = np.zeros((trials, len(radii)), dtype=bool)
    for trial in range(trials):
        open_mask = trial_open_mask(window, master_seed, trial)
        labels = component_labels(window, open_mask)
        cluster = labels == labels[window.origin_index]
        reach = norms[cluster].max() if cluster.any() else 0
        indicators[trial] = [reach >= r for r in radii]
    estimates = [
        _make_estimate(int(indicators[:, i].sum()), trials, master_seed, INDEXED_STREAM_RULE,
                       label=f"{label}r{r}" if label else f"reach-r{r}")
        for i, r in enumerate(radii)
    ]
    return estimates, indicators


def exact_event_probability(window: GraphWindow, event) -> float:
    """Sum of product-Bernoulli weights over all configurations in the event.

    Exhaustive over all ``2^edges`` configurations, evaluated in vectorized
    batches; refuses windows beyond ``MAX_EXACT_EDGES`` edges.
    """
    m = window.n_edges
    if m > MAX_EXACT_EDGES:
        raise EnumerationLimitError(
            f"window has {m} edges; exact enumeration is capped at {MAX_EXACT_EDGES}"
        )
    left, right = event_terminals(window, event)
    total_configs = 1 << m
    batch_size = min(total_configs, 1 << 16)
    probs = window.probs
    batch_totals = []
    for start in range(0, total_configs, batch_size):
        configs = np.arange(start, min(start + batch_size, total_configs), dtype=np.uint32)
        open_matrix = np.zeros((configs.size, m), dtype=bool)
        weights = np.ones(configs.size, dtype=np.float64)
        for e in range(m):
            bit = (configs >> np.uint32(e)) & np.uint32(1)
            open_matrix[:, e] = bit.astype(bool)
            weights *= np.where(open_matrix[:, e], probs[e], 1.0 - probs[e])
        labels = propagation_labels(window.n_vertices, window.edges_u, window.edges_v, open_matrix)
        hit = _connected_batch(labels, left, right)
        batch_totals.append(float(weights[hit].sum()))
    return math.fsum(batch_totals)
