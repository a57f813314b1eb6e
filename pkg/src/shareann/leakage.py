"""Sharing-cost counters and the three-interface leakage metrics.

Cost model: sharing one index unit (a directed connection of a plain
graph, or one branch entry of a bitgraph) means invoking the sharing
algorithm for each of the unit's d coordinates toward each of the n
parties, so every unit adds d*n to share_ops.  Leakage ratios are exact
rationals: numerators count index slots reachable from a compromised
element, the denominator is the data-repository size.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field as dataclass_field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .bitgraph import Bitgraph, Location
from .field import FieldParams, ss_share


class UnknownElement(Exception):
    """Leakage query for an element absent from the index."""


@dataclass
class CostLedger:
    """Monotone operation counters for one scheme run."""

    scheme: str
    share_ops: int = 0        # index-unit sharing, d*n per unit
    data_share_ops: int = 0   # stored-vector sharing on insert
    query_share_ops: int = 0  # query-vector sharing on search
    ac_mul_ops: int = 0       # coordinate multiplications inside the circuit
    ac_compare_ops: int = 0   # sign reveals
    recon_ops: int = 0        # Lagrange interpolations (incl. masked openings)
    index_units: int = 0      # shared index units (directed links or entries)
    params: dict = dataclass_field(default_factory=dict)

    def snapshot(self) -> dict:
        return {
            "scheme": self.scheme,
            "share_ops": self.share_ops,
            "data_share_ops": self.data_share_ops,
            "query_share_ops": self.query_share_ops,
            "ac_mul_ops": self.ac_mul_ops,
            "ac_compare_ops": self.ac_compare_ops,
            "recon_ops": self.recon_ops,
            "index_units": self.index_units,
            "params": dict(self.params),
        }


# -- minimum sharable set -----------------------------------------------------


def directed_connections(adj: Sequence[Iterable[int]]) -> list[tuple[int, int]]:
    """All distinct directed connections of an undirected graph."""
    return sorted((u, v) for u in range(len(adj)) for v in adj[u])


def mss_size(adj: Sequence[Iterable[int]]) -> int:
    """Size of the minimum sharable set: twice the edge count."""
    return sum(len(list(ns)) for ns in adj)


def expected_naive_share_ops(d: int, n: int, edges: int) -> int:
    return d * 2 * edges * n


def expected_bitgraph_share_ops(d: int, n: int, entries: int) -> int:
    return d * entries * n


def share_graph_index(adj: Sequence[Iterable[int]], vectors: Sequence[Sequence[int]],
                      params: FieldParams, rng, ledger: CostLedger) -> None:
    """Share a plain graph: one unit per directed connection, carrying the
    target vertex's vector."""
    for _, v in directed_connections(adj):
        for coord in vectors[v]:
            ss_share(coord, params, rng)
        ledger.index_units += 1
        ledger.share_ops += len(vectors[v]) * params.n


def share_bitgraph_index(bg: Bitgraph, vectors: Sequence[Sequence[int]],
                         params: FieldParams, rng, ledger: CostLedger) -> None:
    """Share a bitgraph: one unit per branch entry."""
    for bid in sorted(bg.branches):
        for ent in bg.branches[bid].entries:
            for coord in vectors[ent.vertex]:
                ss_share(coord, params, rng)
            ledger.index_units += 1
            ledger.share_ops += len(vectors[ent.vertex]) * params.n


# -- privacy triplet ----------------------------------------------------------


def entry_term(bg: Bitgraph, vertex: int) -> int:
    """Per-layer slot count revealed by one element: over each of its
    locations, the predecessor slot, post_d successors, and parallel-branch
    links, plus one for the predecessor convention."""
    locs = bg.locations(vertex)
    if not locs:
        raise UnknownElement(f"vertex {vertex} not stored")
    total = 0
    for b, s in locs:
        ent = bg.entry((b, s))
        total += 1 + ent.post_d + len(ent.par_b)
    return total


def honeycomb_closure(bg: Bitgraph, vertex: int,
                      max_hops: int | None = None) -> set[int]:
    """Vertices deducible from `vertex` by walking honeycomb connectivity
    slot to slot, to max_hops steps (None = full transitive closure).
    The chosen vertex itself is excluded."""
    starts = bg.locations(vertex)
    if not starts:
        raise UnknownElement(f"vertex {vertex} not stored")
    seen: set[Location] = set(starts)
    frontier: deque[tuple[Location, int]] = deque((loc, 0) for loc in starts)
    reached: set[int] = set()
    while frontier:
        loc, hops = frontier.popleft()
        if max_hops is not None and hops >= max_hops:
            continue
        for v, vloc in bg.honeycomb_neighbors(loc):
            if vloc in seen:
                continue
            seen.add(vloc)
            reached.add(v)
            frontier.append((vloc, hops + 1))
    reached.discard(vertex)
    return reached


def leakage_interface_one(bg: Bitgraph, vertex: int, upper_layers: int,
                          ced_size: int) -> Fraction:
    """Data-to-index ratio: slots matching the chosen element across all
    layers, over the repository size."""
    return Fraction((upper_layers + 1) * entry_term(bg, vertex), ced_size)


def leakage_interface_two(bg: Bitgraph, vertex: int, upper_layers: int,
                          ced_size: int, max_hops: int | None = None) -> Fraction:
    """Index-to-index ratio: the interface-one formula summed over every
    element deducible from the chosen one."""
    deduced = honeycomb_closure(bg, vertex, max_hops)
    total = sum(entry_term(bg, w) for w in deduced)
    return Fraction((upper_layers + 1) * total, ced_size)


def leakage_interface_three(bg: Bitgraph, vertex: int, upper_layers: int,
                            ced_size: int, theta,
                            theta_is_distance: bool = False,
                            dist_to: Callable[[int], float] | None = None,
                            max_hops: int | None = None,
                            ) -> tuple[Fraction, int]:
    """Index-to-data ratio: interface two plus the chosen element's own
    term (the closure-size-plus-one summand set), with the distance
    qualifier counting closure members inside theta when theta is a
    distance, or the summand count when theta is a neighbor count.

    Returns (ratio, qualified_count); the ratio is the reported privacy
    budget for this element."""
    deduced = honeycomb_closure(bg, vertex, max_hops)
    total = sum(entry_term(bg, w) for w in deduced) + entry_term(bg, vertex)
    ratio = Fraction((upper_layers + 1) * total, ced_size)
    if theta_is_distance:
        if dist_to is None:
            raise ValueError("distance-mode qualifier needs dist_to")
        qualified = sum(1 for w in deduced if dist_to(w) <= theta)
    else:
        qualified = len(deduced) + 1
    return ratio, qualified


@dataclass
class LeakageReport:
    """Per-element triplet values plus the aggregate budget."""

    upper_layers: int
    ced_size: int
    samples: list[dict] = dataclass_field(default_factory=list)
    epsilon: Fraction = Fraction(0)

    def to_jsonable(self) -> dict:
        return {
            "upper_layers": self.upper_layers,
            "ced_size": self.ced_size,
            "samples": [
                {k: (str(v) if isinstance(v, Fraction) else v)
                 for k, v in s.items()}
                for s in self.samples
            ],
            "epsilon": str(self.epsilon),
        }


def build_leakage_report(bg: Bitgraph, upper_layers: int, ced_size: int,
                         elements: Iterable[int], theta,
                         theta_is_distance: bool = False,
                         dist_between: Callable[[int, int], float] | None = None,
                         max_hops: int | None = None) -> LeakageReport:
    """Trace the full I-III trajectory for each sampled element.

    The reported epsilon is the worst (largest) interface-three ratio over
    the sample; the budget itself carries no normative threshold here, it
    is reported, never checked."""
    report = LeakageReport(upper_layers=upper_layers, ced_size=ced_size)
    worst = Fraction(0)
    for e in elements:
        l1 = leakage_interface_one(bg, e, upper_layers, ced_size)
        l2 = leakage_interface_two(bg, e, upper_layers, ced_size, max_hops)
        dist_to = (lambda w, _e=e: dist_between(_e, w)) if dist_between else None
        l3, qualified = leakage_interface_three(
            bg, e, upper_layers, ced_size, theta,
            theta_is_distance=theta_is_distance, dist_to=dist_to,
            max_hops=max_hops)
        report.samples.append({
            "element": e,
            "interface_one": l1,
            "interface_two": l2,
            "interface_three": l3,
            "qualified": qualified,
        })
        worst = max(worst, l3)
    report.epsilon = worst
    return report
