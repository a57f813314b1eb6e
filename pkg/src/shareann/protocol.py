"""Multi-party simulator for the three sharing schemes.

basic:  flat shared dataset, brute-force search over shares.
mirror: plaintext-topology layered graph, shared payloads.
real:   layered bitgraphs (layer 0 doubles as the data repository),
        shared payloads, public structural metadata.

Parties run in one process; a PartyNetwork plays the synchronous broadcast
fabric and keeps a replayable log.  Structural metadata (seq, post_d,
par_b, visit bits, branch locations) is public at every party, only vector
payloads are share-split.  Distance comparisons reveal a sign to the
querying party and nothing else.

PlainBitgraphIndex is the plaintext twin of the real scheme, used as its
exact-equality oracle.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .bitgraph import Bitgraph, Location, WalkTrace
from .field import (
    INNER_PRODUCT,
    MERSENNE_61,
    SQUARED_EUCLIDEAN,
    FieldParams,
    KeyedPrg,
    ShareVector,
    TripleDealer,
    ac_compare_sign,
    ac_distance,
    decode_vector,
    share_neg,
)
from .hnsw import EmptyIndex, EmptyDataset, ordering_distance, sample_level
from .leakage import CostLedger

SNAPSHOT_VERSION = 1
LOG_VERSION = 1


class EmptyLayer(Exception):
    """Layer search requested on a layer with no entries."""


def _canon(payload) -> str:
    """Canonical text form for log digests; payloads must be built from
    ints, strings, lists, tuples and insertion-ordered dicts."""
    if isinstance(payload, dict):
        return "{" + ",".join(f"{_canon(k)}:{_canon(v)}" for k, v in payload.items()) + "}"
    if isinstance(payload, (list, tuple)):
        return "[" + ",".join(_canon(x) for x in payload) + "]"
    return repr(payload)


class MessageLog:
    """Replayable record of every communication round.

    Lines are `round|sender|recipients|tag|digest`; a rolling digest and
    count are always maintained so heavy runs can skip line retention and
    still support byte-for-byte run comparison."""

    def __init__(self, keep_lines: bool = True, digests: bool = True):
        self.keep_lines = keep_lines
        self.digests = digests
        self.lines: list[str] = []
        self.count = 0
        self._rolling = hashlib.sha256(b"log-v%d" % LOG_VERSION)

    def record(self, round_no: int, sender, recipients: str, tag: str, payload):
        self.count += 1
        if not self.digests:
            return
        digest = hashlib.sha256(_canon(payload).encode()).hexdigest()[:16]
        line = f"{round_no}|{sender}|{recipients}|{tag}|{digest}"
        self._rolling.update(line.encode())
        if self.keep_lines:
            self.lines.append(line)

    def fingerprint(self) -> str:
        if not self.digests:
            raise RuntimeError("digests were disabled for this run")
        return f"{self._rolling.hexdigest()}:{self.count}"

    def export(self) -> str:
        if not self.keep_lines:
            raise RuntimeError("log lines were not retained for this run")
        return "\n".join(self.lines) + f"\n# fingerprint {self.fingerprint()}\n"


class PartyNetwork:
    """Synchronous reliable broadcast fabric for n honest-but-curious
    parties, with one message per sender per round."""

    def __init__(self, n: int, ledger: CostLedger | None = None,
                 keep_log: bool = True):
        self.n = n
        self.round = 0
        self.ledger = ledger
        self.log = MessageLog(keep_lines=keep_log, digests=keep_log)

    def broadcast(self, sender: int, tag: str, payload):
        self.round += 1
        self.log.record(self.round, sender, "all", tag, payload)

    def open_round(self, tag: str, payloads: dict):
        """All parties publish simultaneously (masked openings)."""
        self.round += 1
        self.log.record(self.round, "*", "all", tag, payloads)

    def gather_round(self, tag: str, receiver: int, payloads: dict):
        """Contributing parties send privately to one receiver."""
        self.round += 1
        self.log.record(self.round, "*", str(receiver), tag, payloads)

    def scatter_round(self, sender: int, tag: str, payloads: dict):
        """One party sends a distinct private message to each other party."""
        self.round += 1
        self.log.record(self.round, sender, "each", tag, payloads)


@dataclass
class ProtocolState:
    """Shared key material and the chronological counter.

    All per-run randomness is derived from the master seed with domain
    separation: one stream keys insert-time sharing, another query
    sharing, plus dealer and level streams."""

    params: FieldParams
    seed: int | str
    sigma: int = 0

    def __post_init__(self):
        root = KeyedPrg(self.seed)
        self.insert_keys = root.child("K1")
        self.search_keys = root.child("K2")
        self.dealer_keys = root.child("dealer")
        self.level_keys = root.child("levels")
        self.party_seeds = [root.child(f"sd{i}")._key for i in range(self.params.n)]

    def key_digest(self) -> str:
        h = hashlib.sha256()
        for s in (self.insert_keys, self.search_keys, self.dealer_keys,
                  self.level_keys):
            h.update(s._key)
        for s in self.party_seeds:
            h.update(s)
        return h.hexdigest()


def setup(lambda_: int = 40, n: int = 3, t: int = 2, rho: int = 4,
          seed: int | str = 0, p: int = MERSENNE_61) -> ProtocolState:
    """Agree on field parameters and derive key material; sigma starts at 0."""
    params = FieldParams(p=p, k=lambda_, rho=rho, n=n, t=t)
    return ProtocolState(params=params, seed=seed)


@dataclass
class IndexConfig:
    m: int = 8
    ml: float | None = None  # None picks 1/ln(m)
    ef_construction: int = 32
    metric: str = SQUARED_EUCLIDEAN
    select_radius: int | None = None

    def level_norm(self) -> float:
        return (1.0 / math.log(self.m)) if self.ml is None else self.ml


# -- plaintext twin of the real scheme ---------------------------------------


class PlainBitgraphIndex:
    """Layered bitgraph index over plaintext vectors.

    Mirrors the shared scheme step for step (same descent, same neighbor
    selection, same tie-breaks) so the two produce identical results on
    identical input; vectors should be integer-scaled so distances are
    exact."""

    def __init__(self, config: IndexConfig | None = None):
        self.config = config or IndexConfig()
        self._dist = ordering_distance(self.config.metric)
        self.vectors: list[tuple] = []
        self.levels: list[int] = []
        self.repo = Bitgraph()            # layer 0, the data repository
        self.layers: dict[int, Bitgraph] = {}
        self.top = 0
        self.enter: int | None = None

    def layer(self, l: int) -> Bitgraph:
        return self.repo if l == 0 else self.layers[l]

    def dist_to(self, q: Sequence) -> Callable[[int], float]:
        return lambda v: self._dist(q, self.vectors[v])

    def _layer_search(self, l: int, dist, theta: int, ev: int,
                      ) -> tuple[list[tuple[int, Location]], WalkTrace]:
        bg = self.layer(l)
        res, trace = bg.search(dist, theta, bg.enter_location(ev))
        bg.reset_visit_bits()
        return res, trace

    def _select(self, found: list[tuple[int, Location]], dist,
                ) -> list[tuple[int, Location]]:
        pool = found
        if self.config.select_radius is not None:
            pool = [it for it in found if dist(it[0]) <= self.config.select_radius]
        return pool[: self.config.m]

    def insert(self, vec: Sequence, level: int) -> int:
        vid = len(self.vectors)
        self.vectors.append(tuple(vec))
        self.levels.append(level)
        if self.enter is None:
            self.repo.insert(vid)
            for l in range(1, level + 1):
                bg = Bitgraph()
                bg.insert(vid)
                self.layers[l] = bg
            self.top = level
            self.enter = vid
            return vid
        dist = self.dist_to(vec)
        ev = self.enter
        for l in range(self.top, level, -1):
            res, _ = self._layer_search(l, dist, 1, ev)
            ev = res[0][0]
        for l in range(min(level, self.top), -1, -1):
            res, _ = self._layer_search(l, dist, self.config.ef_construction, ev)
            self.layer(l).insert_multi(vid, self._select(res, dist))
            ev = res[0][0]
        if level > self.top:
            for l in range(self.top + 1, level + 1):
                bg = Bitgraph()
                bg.insert(vid)
                self.layers[l] = bg
            self.top = level
            self.enter = vid
        return vid

    def search(self, q: Sequence, theta: int,
               ) -> tuple[list[int], WalkTrace]:
        if self.enter is None:
            raise EmptyIndex("no vectors inserted")
        dist = self.dist_to(q)
        ev = self.enter
        for l in range(self.top, 0, -1):
            res, _ = self._layer_search(l, dist, 1, ev)
            ev = res[0][0]
        res, trace = self._layer_search(0, dist, theta, ev)
        return [v for v, _ in res], trace

    def index_entry_count(self) -> int:
        return self.repo.total_entries + sum(
            bg.total_entries for bg in self.layers.values())


# -- shared-queue helpers -----------------------------------------------------


def _insort_by(lst: list, item, less) -> None:
    lo, hi = 0, len(lst)
    while lo < hi:
        mid = (lo + hi) // 2
        if less(item, lst[mid]):
            hi = mid
        else:
            lo = mid + 1
    lst.insert(lo, item)


class _SchemeBase:
    """State common to the three shared schemes."""

    def __init__(self, state: ProtocolState, scheme: str,
                 keep_log: bool = True):
        self.state = state
        self.params = state.params
        self.ledger = CostLedger(scheme, params={
            "n": self.params.n, "t": self.params.t})
        self.network = PartyNetwork(self.params.n, ledger=self.ledger,
                                    keep_log=keep_log)
        self.dealer = TripleDealer(self.params, state.dealer_keys)
        self.stored: dict[int, ShareVector] = {}

    def _share_stored(self, owner: int, vec: Sequence) -> tuple[int, ShareVector]:
        vid = len(self.stored)
        sv = ShareVector.from_plain(vec, self.params, self.state.insert_keys)
        self.stored[vid] = sv
        self.ledger.data_share_ops += sv.dim * self.params.n
        self.ledger.params["d"] = sv.dim
        self.network.scatter_round(owner, "share-data",
                                   {u: sv.shares[u] for u in range(self.params.n)})
        return vid, sv

    def _share_query(self, querier: int, vec: Sequence) -> ShareVector:
        sv = ShareVector.from_plain(vec, self.params, self.state.search_keys)
        self.ledger.query_share_ops += sv.dim * self.params.n
        self.network.scatter_round(querier, "share-query",
                                   {u: sv.shares[u] for u in range(self.params.n)})
        return sv

    def _distances(self, q_sh: ShareVector, metric: str) -> "_SharedDistances":
        return _SharedDistances(self, q_sh, metric)

    def _sign(self, a: ShareVector, b: ShareVector, coordinator: int) -> int:
        return ac_compare_sign(a, b, coordinator, self.network)

    def _reconstruct_at(self, querier: int, sv: ShareVector) -> list[int]:
        contributors = list(range(self.params.t))
        self.network.gather_round("result-shares", querier,
                                  {u: sv.shares[u] for u in contributors})
        self.ledger.recon_ops += sv.dim
        return sv.reconstruct(contributors)


class _SharedDistances:
    """Per-operation cache of shared query distances and compare outcomes.

    Distances to a fixed query never change during one search or insert,
    so a pairwise sign already revealed to the coordinator need not be
    re-run; repeat lookups are answered locally and only fresh pairs cost
    a protocol round."""

    def __init__(self, scheme: "_SchemeBase", q_sh: ShareVector, metric: str):
        self.scheme = scheme
        self.q_sh = q_sh
        self.metric = metric
        self._dist: dict[int, ShareVector] = {}
        self._signs: dict[tuple[int, int], int] = {}
        self._radius_signs: dict[int, int] = {}

    def dist(self, v: int) -> ShareVector:
        sv = self._dist.get(v)
        if sv is None:
            sv = ac_distance(self.scheme.stored[v], self.q_sh, self.metric,
                             self.scheme.dealer, self.scheme.network)
            if self.metric == INNER_PRODUCT:
                sv = share_neg(sv)
            self._dist[v] = sv
        return sv

    def sign(self, va: int, vb: int, coordinator: int) -> int:
        if va == vb:
            return 0
        s = self._signs.get((va, vb))
        if s is None:
            s = ac_compare_sign(self.dist(va), self.dist(vb), coordinator,
                                self.scheme.network)
            self._signs[(va, vb)] = s
            self._signs[(vb, va)] = -s
        return s

    def sign_to_radius(self, v: int, radius: ShareVector, coordinator: int) -> int:
        s = self._radius_signs.get(v)
        if s is None:
            s = ac_compare_sign(self.dist(v), radius, coordinator,
                                self.scheme.network)
            self._radius_signs[v] = s
        return s


class BasicScheme(_SchemeBase):
    """Flat shared dataset; search is brute force over shares."""

    def __init__(self, state: ProtocolState, metric: str = SQUARED_EUCLIDEAN,
                 keep_log: bool = True):
        super().__init__(state, "basic", keep_log=keep_log)
        self.metric = metric

    def insert(self, owner: int, vec: Sequence) -> int:
        vid, _ = self._share_stored(owner, vec)
        self.network.broadcast(owner, "insert", [vid])
        self.state.sigma += 1
        return vid

    def search(self, querier: int, vec: Sequence, theta: int,
               ) -> tuple[list[int], list[list[float]]]:
        if not self.stored:
            raise EmptyDataset("no shared vectors stored")
        q_sh = self._share_query(querier, vec)
        dd = self._distances(q_sh, self.metric)
        remaining = sorted(self.stored)
        chosen: list[int] = []
        for _ in range(min(theta, len(remaining))):
            best = remaining[0]
            for other in remaining[1:]:
                if dd.sign(other, best, querier) < 0:
                    best = other
            chosen.append(best)
            remaining.remove(best)
        vectors = [
            decode_vector(self._reconstruct_at(querier, self.stored[v]),
                          self.params)
            for v in chosen
        ]
        return chosen, vectors


class MirrorScheme(_SchemeBase):
    """Layered graph with public adjacency and shared payloads.

    Traversal follows the plaintext layered-graph search exactly, with
    every distance going through the arithmetic circuit and every
    comparison through a sign reveal."""

    def __init__(self, state: ProtocolState, config: IndexConfig | None = None,
                 keep_log: bool = True):
        super().__init__(state, "mirror", keep_log=keep_log)
        self.config = config or IndexConfig()
        self.layers: list[dict[int, set[int]]] = []
        self.levels: list[int] = []
        self.enter: int | None = None

    @property
    def top(self) -> int:
        return len(self.layers) - 1

    def _graph_search(self, adjacency: dict[int, set[int]], dd: _SharedDistances,
                      enters: Sequence[int], ef: int, querier: int,
                      trace: list[int] | None = None) -> list[int]:
        visited: set[int] = set()

        def less(a: int, b: int) -> bool:
            s = dd.sign(a, b, querier)
            return s < 0 if s else a < b

        cand: list[int] = []
        results: list[int] = []
        for ep in enters:
            if ep in visited:
                continue
            visited.add(ep)
            if trace is not None:
                trace.append(ep)
            _insort_by(cand, ep, less)
            _insort_by(results, ep, less)
        del results[ef:]
        while cand:
            cur = cand.pop(0)
            if dd.sign(cur, results[-1], querier) > 0:
                break
            for w in sorted(adjacency.get(cur, ())):
                if w in visited:
                    continue
                visited.add(w)
                if trace is not None:
                    trace.append(w)
                self.network.broadcast(querier, "visit", [w])
                s = dd.sign(w, results[-1], querier)
                if s < 0 or len(results) < ef:
                    _insort_by(cand, w, less)
                    _insort_by(results, w, less)
                    del results[ef:]
        return results

    def _select(self, found: list[int], dd: _SharedDistances,
                querier: int) -> list[int]:
        pool = found
        if self.config.select_radius is not None:
            radius = ShareVector.of_constant(
                self.config.select_radius, 1, self.params)
            pool = [v for v in found
                    if dd.sign_to_radius(v, radius, querier) <= 0]
        return pool[: self.config.m]

    def insert(self, owner: int, vec: Sequence) -> int:
        level = sample_level(self.state.level_keys, self.config.level_norm())
        vid, _ = self._share_stored(owner, vec)
        self.levels.append(level)
        self.network.broadcast(owner, "insert-level", [vid, level])
        if self.enter is None:
            for _ in range(level + 1):
                self.layers.append({vid: set()})
            self.enter = vid
            self.state.sigma += 1
            return vid
        q_sh = self.stored[vid]
        dd = self._distances(q_sh, self.config.metric)
        top = self.top
        ev = self.enter
        for l in range(top, level, -1):
            ev = self._graph_search(self.layers[l], dd, [ev], 1, owner)[0]
        for l in range(min(level, top), -1, -1):
            found = self._graph_search(self.layers[l], dd, [ev],
                                       self.config.ef_construction, owner)
            neighbors = self._select(found, dd, owner)
            self.layers[l][vid] = set()
            for w in neighbors:
                self.layers[l][vid].add(w)
                self.layers[l][w].add(vid)
                self.ledger.index_units += 2
                self.ledger.share_ops += 2 * q_sh.dim * self.params.n
            self.network.broadcast(owner, "insert-edges",
                                   [l, vid, sorted(neighbors)])
            ev = found[0]
        for l in range(top + 1, level + 1):
            self.layers.append({vid: set()})
            self.enter = vid
        self.state.sigma += 1
        return vid

    def search(self, querier: int, vec: Sequence, theta: int,
               trace: list[int] | None = None,
               ) -> tuple[list[int], list[list[float]]]:
        if self.enter is None:
            raise EmptyIndex("no vectors inserted")
        q_sh = self._share_query(querier, vec)
        dd = self._distances(q_sh, self.config.metric)
        ev = self.enter
        for l in range(self.top, 0, -1):
            ev = self._graph_search(self.layers[l], dd, [ev], 1, querier)[0]
        ids = self._graph_search(self.layers[0], dd, [ev], theta, querier,
                                 trace=trace)
        vectors = [
            decode_vector(self._reconstruct_at(querier, self.stored[v]),
                          self.params)
            for v in ids
        ]
        return ids, vectors

    def edge_count(self) -> int:
        return sum(sum(len(s) for s in lay.values()) for lay in self.layers) // 2


class RealScheme(_SchemeBase):
    """Layered bitgraphs with shared payloads; layer 0 is the repository.

    Structure updates are broadcast in clear, payloads stay share-split;
    searches walk honeycomb neighborhoods with circuit distances, sign
    reveals, broadcast visit bits, and the tail-detour rule."""

    def __init__(self, state: ProtocolState, config: IndexConfig | None = None,
                 keep_log: bool = True):
        super().__init__(state, "real", keep_log=keep_log)
        self.config = config or IndexConfig()
        self.repo = Bitgraph()
        self.layers: dict[int, Bitgraph] = {}
        self.levels: list[int] = []
        self.top = 0
        self.enter: int | None = None

    def layer(self, l: int) -> Bitgraph:
        return self.repo if l == 0 else self.layers[l]

    def _count_new_entries(self, count: int):
        d = self.ledger.params.get("d", 0)
        self.ledger.index_units += count
        self.ledger.share_ops += count * d * self.params.n

    def _layer_search(self, l: int, dd: _SharedDistances, theta: int,
                      ev: int, actor: int,
                      ) -> tuple[list[tuple[int, Location]], WalkTrace]:
        bg = self.layer(l)
        if not any(b.entries for b in bg.branches.values()):
            raise EmptyLayer(f"layer {l} has no entries")
        enter_loc = bg.enter_location(ev)

        def less(a, b) -> bool:
            s = dd.sign(a[0], b[0], actor)
            return s < 0 if s else (a[0], a[1]) < (b[0], b[1])

        def mark_vertex(v: int, found: Location, trace: WalkTrace) -> list[Location]:
            marked = [found]
            bg.entry(found).e = 1
            trace.steps.append((v, found))
            for loc in bg.vertex_index[v]:
                if loc == found:
                    continue
                ent = bg.entry(loc)
                if not ent.e:
                    ent.e = 1
                    trace.steps.append((v, loc))
                    marked.append(loc)
            self.network.broadcast(actor, "visit",
                                   sorted([b, s] for b, s in marked))
            return marked

        ent = bg.entry(enter_loc)
        if ent.e:
            raise RuntimeError("visit bits not reset before search")
        trace = WalkTrace()
        cand: list[tuple[int, Location]] = []
        dd.dist(ent.vertex)
        for loc in mark_vertex(ent.vertex, enter_loc, trace):
            _insort_by(cand, (ent.vertex, loc), less)
        results: list[tuple[int, Location]] = [(ent.vertex, enter_loc)]
        result_vertices = {ent.vertex}
        while cand:
            cur = cand.pop(0)
            if dd.sign(cur[0], results[-1][0], actor) > 0:
                break
            while bg.entry(cur[1]).post_d == 0 and cand:
                trace.detour_added += 1
                cur = cand.pop(0)
            for v, vloc in bg.honeycomb_neighbors(cur[1]):
                if bg.entry(vloc).e:
                    continue
                marked = mark_vertex(v, vloc, trace)
                s = dd.sign(v, results[-1][0], actor)
                if s < 0 or len(results) < theta:
                    for loc in marked:
                        _insort_by(cand, (v, loc), less)
                    if v not in result_vertices:
                        _insort_by(results, (v, vloc), less)
                        result_vertices.add(v)
                        if len(results) > theta:
                            dropped = results.pop()
                            result_vertices.discard(dropped[0])
        bg.reset_visit_bits()
        self.network.broadcast(actor, "visit-reset", [l])
        return results, trace

    def _select(self, found: list[tuple[int, Location]], dd: _SharedDistances,
                actor: int) -> list[tuple[int, Location]]:
        pool = found
        if self.config.select_radius is not None:
            radius = ShareVector.of_constant(
                self.config.select_radius, 1, self.params)
            pool = [it for it in found
                    if dd.sign_to_radius(it[0], radius, actor) <= 0]
        return pool[: self.config.m]

    def insert_layer(self, owner: int, l: int, vid: int,
                     selected: list[tuple[int, Location]]) -> list[Location]:
        """Structural mirror of the plaintext branch insertion: the owner
        broadcasts the public metadata updates, payloads stay shared."""
        bg = self.layer(l)
        before = bg.total_entries
        created = bg.insert_multi(vid, selected)
        self._count_new_entries(bg.total_entries - before)
        self.network.broadcast(
            owner, "insert-structure",
            [l, sorted([v, b, s] for v, (b, s) in selected),
             sorted([b, s] for b, s in created)])
        return created

    def search_layer(self, actor: int, vec: Sequence, l: int, theta: int,
                     enter_vertex: int | None = None,
                     ) -> tuple[list[tuple[int, Location]], WalkTrace]:
        """One-layer shared search entered at enter_vertex (default: the
        index enter point); shares the query under the search key stream."""
        if enter_vertex is None:
            if self.enter is None:
                raise EmptyLayer("index is empty")
            enter_vertex = self.enter
        q_sh = self._share_query(actor, vec)
        dd = self._distances(q_sh, self.config.metric)
        return self._layer_search(l, dd, theta, enter_vertex, actor)

    def insert(self, owner: int, vec: Sequence) -> int:
        level = sample_level(self.state.level_keys, self.config.level_norm())
        vid, q_sh = self._share_stored(owner, vec)
        self.levels.append(level)
        self.network.broadcast(owner, "insert-level", [vid, level])
        if self.enter is None:
            self.repo.insert(vid)
            self._count_new_entries(1)
            for l in range(1, level + 1):
                bg = Bitgraph()
                bg.insert(vid)
                self.layers[l] = bg
                self._count_new_entries(1)
            self.top = level
            self.enter = vid
            self.network.broadcast(owner, "insert-structure",
                                   [0, [[vid, 0, 0]]])
            self.state.sigma += 1
            return vid
        dd = self._distances(q_sh, self.config.metric)
        ev = self.enter
        for l in range(self.top, level, -1):
            res, _ = self._layer_search(l, dd, 1, ev, owner)
            ev = res[0][0]
        for l in range(min(level, self.top), -1, -1):
            res, _ = self._layer_search(l, dd, self.config.ef_construction,
                                        ev, owner)
            selected = self._select(res, dd, owner)
            self.insert_layer(owner, l, vid, selected)
            ev = res[0][0]
        if level > self.top:
            for l in range(self.top + 1, level + 1):
                bg = Bitgraph()
                bg.insert(vid)
                self.layers[l] = bg
                self._count_new_entries(1)
            self.top = level
            self.enter = vid
        self.state.sigma += 1
        return vid

    def search(self, querier: int, vec: Sequence, theta: int,
               ) -> tuple[list[int], list[list[float]], WalkTrace]:
        if self.enter is None:
            raise EmptyIndex("no vectors inserted")
        q_sh = self._share_query(querier, vec)
        dd = self._distances(q_sh, self.config.metric)
        ev = self.enter
        for l in range(self.top, 0, -1):
            res, _ = self._layer_search(l, dd, 1, ev, querier)
            ev = res[0][0]
        res, trace = self._layer_search(0, dd, theta, ev, querier)
        ids = [v for v, _ in res]
        vectors = [
            decode_vector(self._reconstruct_at(querier, self.stored[v]),
                          self.params)
            for v in ids
        ]
        return ids, vectors, trace

    def index_entry_count(self) -> int:
        return self.repo.total_entries + sum(
            bg.total_entries for bg in self.layers.values())


# -- snapshots ---------------------------------------------------------------


def save_snapshot(scheme: RealScheme, outdir: str | Path) -> None:
    """Write public metadata plus one share file per party."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    params = scheme.params
    meta = {
        "version": SNAPSHOT_VERSION,
        "p": params.p, "k": params.k, "rho": params.rho,
        "n": params.n, "t": params.t,
        "sigma": scheme.state.sigma,
        "enter": scheme.enter,
        "top": scheme.top,
        "levels": scheme.levels,
        "metric": scheme.config.metric,
        "repo": scheme.repo.to_lines(),
        "layers": {str(l): bg.to_lines() for l, bg in scheme.layers.items()},
    }
    (outdir / "cedb.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    for u in range(params.n):
        shares = {str(v): sv.shares[u] for v, sv in scheme.stored.items()}
        (outdir / f"party_{u}.json").write_text(json.dumps(shares, sort_keys=True))


def load_snapshot(outdir: str | Path):
    """Read a snapshot back; returns (params, meta, repo, layers, stored)."""
    outdir = Path(outdir)
    meta = json.loads((outdir / "cedb.json").read_text())
    if meta.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {meta.get('version')!r}")
    params = FieldParams(p=meta["p"], k=meta["k"], rho=meta["rho"],
                         n=meta["n"], t=meta["t"])
    repo = Bitgraph.from_lines(meta["repo"])
    layers = {int(l): Bitgraph.from_lines(lines)
              for l, lines in meta["layers"].items()}
    per_party = []
    for u in range(params.n):
        per_party.append(json.loads((outdir / f"party_{u}.json").read_text()))
    stored: dict[int, ShareVector] = {}
    for v in sorted(per_party[0], key=int):
        shares = [per_party[u][v] for u in range(params.n)]
        stored[int(v)] = ShareVector(dim=len(shares[0]), shares=shares,
                                     params=params)
    return params, meta, repo, layers, stored
