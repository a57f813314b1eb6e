"""Plaintext reference search: brute force and a layered proximity-graph index.

These are the correctness oracles for everything else.  Vectors are plain
tuples (typically integer-scaled so that distances are exact); metric
functions return ordering values where smaller means closer.
"""
from __future__ import annotations

import bisect
import heapq
import math
from typing import Callable, Iterable, Mapping, Sequence

from .field import INNER_PRODUCT, METRICS, SQUARED_EUCLIDEAN


class EmptyDataset(Exception):
    """Brute-force search over nothing."""


class EmptyIndex(Exception):
    """Search on an index with no inserted vectors."""


def squared_euclidean(x: Sequence, y: Sequence):
    return sum((a - b) * (a - b) for a, b in zip(x, y))


def inner_product(x: Sequence, y: Sequence):
    return sum(a * b for a, b in zip(x, y))


def ordering_distance(metric: str) -> Callable[[Sequence, Sequence], float]:
    """Distance for ranking: smaller is closer under either metric."""
    if metric == SQUARED_EUCLIDEAN:
        return squared_euclidean
    if metric == INNER_PRODUCT:
        return lambda x, y: -inner_product(x, y)
    raise ValueError(f"unsupported metric {metric!r}")


def brute_force_ann(q: Sequence, data: Sequence[Sequence], theta: int,
                    metric: str = SQUARED_EUCLIDEAN) -> list[int]:
    """Exact top-theta ids by (distance, id)."""
    if len(data) == 0:
        raise EmptyDataset("dataset is empty")
    if theta < 1:
        raise ValueError("theta must be at least 1")
    dist = ordering_distance(metric)
    order = sorted(range(len(data)), key=lambda i: (dist(q, data[i]), i))
    return order[:theta]


def sample_level(rng, ml: float) -> int:
    """Geometric-style level draw: floor(-ln(u) * ml) for u uniform in (0, 1]."""
    if ml <= 0:
        return 0
    u = 1.0 - rng.random()
    return int(-math.log(u) * ml)


def search_layer(adjacency: Mapping[int, set[int]],
                 dist: Callable[[int], float],
                 enters: Sequence[int], ef: int,
                 trace: list[int] | None = None) -> list[tuple[float, int]]:
    """Greedy beam search over one undirected layer.

    Returns up to ef results sorted by (distance, id).  `trace`, when given,
    collects every vertex whose distance was evaluated, in evaluation order.
    """
    visited: set[int] = set()
    cand: list[tuple[float, int]] = []
    results: list[tuple[float, int]] = []
    for ep in enters:
        if ep in visited:
            continue
        visited.add(ep)
        if trace is not None:
            trace.append(ep)
        item = (dist(ep), ep)
        heapq.heappush(cand, item)
        results.append(item)
    results.sort()
    del results[ef:]
    while cand:
        cur = heapq.heappop(cand)
        if cur[0] > results[-1][0]:
            break
        for w in sorted(adjacency.get(cur[1], ())):
            if w in visited:
                continue
            visited.add(w)
            if trace is not None:
                trace.append(w)
            item = (dist(w), w)
            if item[0] < results[-1][0] or len(results) < ef:
                heapq.heappush(cand, item)
                bisect.insort(results, item)
                del results[ef:]
    return results


class LayeredGraphIndex:
    """Multilayer proximity graph built by sequential insertion.

    Upper layers are probabilistic samples of the layers below; every
    vertex of layer l is present in all layers under it.  Neighbor
    selection on insert is plain closest-first (top-m of the beam search
    results), optionally pre-filtered by a squared-distance cap through
    `select_radius` — no pruning of existing edges ever happens.
    """

    def __init__(self, m: int = 8, ml: float | None = None,
                 ef_construction: int = 32, metric: str = SQUARED_EUCLIDEAN,
                 select_radius: float | None = None):
        if metric not in METRICS:
            raise ValueError(f"unsupported metric {metric!r}")
        self.m = m
        self.ml = (1.0 / math.log(m)) if ml is None else ml
        self.ef_construction = ef_construction
        self.metric = metric
        self.select_radius = select_radius
        self._dist = ordering_distance(metric)
        self.vectors: list[tuple] = []
        self.levels: list[int] = []
        self.layers: list[dict[int, set[int]]] = []
        self.enter: int | None = None

    @property
    def top(self) -> int:
        return len(self.layers) - 1

    def dist_to(self, q: Sequence) -> Callable[[int], float]:
        return lambda v: self._dist(q, self.vectors[v])

    def select_neighbors(self, candidates: Sequence[tuple[float, int]]) -> list[int]:
        pool = candidates
        if self.select_radius is not None:
            pool = [c for c in candidates if c[0] <= self.select_radius]
        return [v for _, v in pool[: self.m]]

    def insert(self, vec: Sequence, level: int) -> int:
        vid = len(self.vectors)
        self.vectors.append(tuple(vec))
        self.levels.append(level)
        if self.enter is None:
            for l in range(level + 1):
                self.layers.append({vid: set()})
            self.enter = vid
            return vid
        dist = self.dist_to(vec)
        top = self.top
        ev = self.enter
        for l in range(top, level, -1):
            ev = search_layer(self.layers[l], dist, [ev], 1)[0][1]
        for l in range(min(level, top), -1, -1):
            found = search_layer(self.layers[l], dist, [ev], self.ef_construction)
            neighbors = self.select_neighbors(found)
            self.layers[l][vid] = set()
            for w in neighbors:
                self.layers[l][vid].add(w)
                self.layers[l][w].add(vid)
            ev = found[0][1]
        for l in range(top + 1, level + 1):
            self.layers.append({vid: set()})
            self.enter = vid
        return vid

    def search(self, q: Sequence, theta: int,
               trace: list[int] | None = None) -> list[int]:
        if self.enter is None:
            raise EmptyIndex("no vectors inserted")
        if theta < 1:
            raise ValueError("theta must be at least 1")
        dist = self.dist_to(q)
        ev = self.enter
        for l in range(self.top, 0, -1):
            ev = search_layer(self.layers[l], dist, [ev], 1)[0][1]
        results = search_layer(self.layers[0], dist, [ev], theta, trace=trace)
        return [v for _, v in results]

    def layer_vertices(self, l: int) -> set[int]:
        return set(self.layers[l])

    def check_hierarchy(self) -> bool:
        return all(
            self.layer_vertices(l) <= self.layer_vertices(l - 1)
            for l in range(1, len(self.layers))
        )

    def edge_count(self, layer: int | None = None) -> int:
        layers = self.layers if layer is None else [self.layers[layer]]
        return sum(sum(len(s) for s in lay.values()) for lay in layers) // 2
