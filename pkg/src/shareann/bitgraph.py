"""Branch-decomposed graph storage with honeycomb traversal.

An ordered undirected graph is stored as branches: ordered entry lists
where the entry at position i is implicitly adjacent to the next post_d
entries of the same branch.  A vertex whose backward link cannot extend a
branch splits a fresh two-entry branch instead, recorded in the source
entry's par_b set.  The same vertex may therefore appear in several
branches; vertex_index tracks every location.

Graphs here are plain adjacency lists: `adj[v]` is the set of neighbors
of vertex v, vertex ids dense and 0-based in insertion order.
"""
from __future__ import annotations

import bisect
import heapq
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Iterable, Sequence

Location = tuple[int, int]  # (branch id, seq)


class DisconnectedVertex(Exception):
    """A non-initial vertex has no neighbor earlier in the order."""


class UnknownNeighbor(Exception):
    """An insertion named a neighbor absent from the target branch."""


class MalformedBranch(Exception):
    """An entry's post_d points past the end of its branch."""


class EmptyBitgraph(Exception):
    """Search requested on a bitgraph with no entries."""


@dataclass
class BitgraphEntry:
    vertex: int
    seq: int
    post_d: int = 0
    par_b: set[int] = dataclass_field(default_factory=set)
    e: int = 0  # visit bit, reset between searches


@dataclass
class Branch:
    id: int
    entries: list[BitgraphEntry]


@dataclass
class WalkTrace:
    """Evaluation order of one search plus its deviation counters.

    `detour_added` counts candidates discarded by the tail-detour rule;
    `deviation` is filled by comparison harnesses that diff this walk
    against a reference-graph walk."""

    steps: list[tuple[int, Location]] = dataclass_field(default_factory=list)
    detour_added: int = 0
    deviation: int | None = None

    @property
    def vertex_set(self) -> set[int]:
        return {v for v, _ in self.steps}


class Bitgraph:
    def __init__(self):
        self.branches: dict[int, Branch] = {}
        self.vertex_index: dict[int, list[Location]] = {}
        self._next_branch = 0

    # -- bookkeeping ----------------------------------------------------

    def _new_branch(self) -> Branch:
        br = Branch(id=self._next_branch, entries=[])
        self.branches[br.id] = br
        self._next_branch += 1
        return br

    def _register(self, vertex: int, loc: Location):
        self.vertex_index.setdefault(vertex, []).append(loc)

    def entry(self, loc: Location) -> BitgraphEntry:
        return self.branches[loc[0]].entries[loc[1]]

    def locations(self, vertex: int) -> list[Location]:
        return self.vertex_index.get(vertex, [])

    def primary_location(self, vertex: int) -> Location:
        return self.vertex_index[vertex][0]

    def enter_location(self, vertex: int) -> Location:
        """Best location to start a walk from: the vertex's entry in its
        longest branch (two-entry split branches are closed pockets, so
        entering one would strand the walk immediately)."""
        locs = self.vertex_index[vertex]
        return min(locs, key=lambda loc: (-len(self.branches[loc[0]].entries),
                                          loc[0], loc[1]))

    @property
    def total_entries(self) -> int:
        return sum(len(b.entries) for b in self.branches.values())

    @property
    def vertex_count(self) -> int:
        return len(self.vertex_index)

    @property
    def duplicate_count(self) -> int:
        return self.total_entries - self.vertex_count

    def __contains__(self, vertex: int) -> bool:
        return vertex in self.vertex_index

    # -- insertion ------------------------------------------------------

    def insert(self, q: int, wi: Sequence[int] = (), loc: int | None = None) -> list[Location]:
        """Place q into branch `loc` given its in-branch neighbor set wi.

        wi must list vertices of branch loc in branch-sequence order.  The
        maximal suffix of the branch lying inside wi is extended in place
        (each member's post_d grows by one, q is appended); every other
        member of wi splits a new two-entry branch.  If the branch tail is
        not in wi, all of wi splits.  On an empty bitgraph, creates the
        first single-entry branch.  Returns the locations created for q.
        """
        if not self.branches:
            if wi:
                raise UnknownNeighbor("neighbors given for the first vertex")
            br = self._new_branch()
            br.entries.append(BitgraphEntry(vertex=q, seq=0))
            self._register(q, (br.id, 0))
            return [(br.id, 0)]
        if loc is None or loc not in self.branches:
            raise UnknownNeighbor(f"branch {loc} does not exist")
        if not wi:
            raise ValueError("insertion into a non-empty bitgraph needs neighbors")
        br = self.branches[loc]
        seq_of = {ent.vertex: ent.seq for ent in br.entries}
        for w in wi:
            if w not in seq_of:
                raise UnknownNeighbor(f"vertex {w} not in branch {loc}")
        wset = set(wi)
        created: list[Location] = []
        # maximal suffix of the branch whose vertices all lie in wi
        suffix: list[BitgraphEntry] = []
        i = len(br.entries) - 1
        while i >= 0 and br.entries[i].vertex in wset:
            suffix.append(br.entries[i])
            i -= 1
        if suffix:  # branch tail is a neighbor: extend in place
            for ent in suffix:
                ent.post_d += 1
            new = BitgraphEntry(vertex=q, seq=len(br.entries))
            br.entries.append(new)
            self._register(q, (loc, new.seq))
            created.append((loc, new.seq))
            splitters = [w for w in wi if w not in {s.vertex for s in suffix}]
        else:
            splitters = list(wi)
        for w in splitters:
            side = self._new_branch()
            side.entries.append(BitgraphEntry(vertex=w, seq=0, post_d=1))
            side.entries.append(BitgraphEntry(vertex=q, seq=1))
            self._register(w, (side.id, 0))
            self._register(q, (side.id, 1))
            created.append((side.id, 1))
            br.entries[seq_of[w]].par_b.add(side.id)
        return created

    def plan_groups(self, selected: Sequence[tuple[int, Location]],
                    ) -> list[tuple[list[int], int]]:
        """Assign chosen neighbors to branches ahead of an insertion.

        For each branch whose tail-back run consists of chosen vertices
        that all span to the branch tail, that run is claimed as one
        extension group (the incoming vertex will be appended there);
        runs are claimed largest first, each vertex at most once.  Every
        unclaimed neighbor stays with the branch where it was found and
        will split.  The span condition keeps extensions exact: a
        post_d increment only ever adds the edge to the appended vertex.
        """
        found: dict[int, Location] = {}
        order: list[int] = []
        for v, loc in selected:
            if v not in found:
                found[v] = loc
                order.append(v)
        pool = set(found)

        def tail_run(bid: int, available: set[int]) -> list[int]:
            entries = self.branches[bid].entries
            tail_seq = len(entries) - 1
            run = []
            i = tail_seq
            while (i >= 0 and entries[i].vertex in available
                   and entries[i].seq + entries[i].post_d == tail_seq):
                run.append(entries[i].vertex)
                i -= 1
            return run

        full_runs = {bid: run for bid in sorted(self.branches)
                     if (run := tail_run(bid, pool))}
        assigned: set[int] = set()
        claims: list[tuple[list[int], int]] = []
        for bid in sorted(full_runs, key=lambda b: (-len(full_runs[b]), b)):
            run = tail_run(bid, pool - assigned)
            if run:
                assigned.update(run)
                claims.append((list(reversed(run)), bid))
        claims.sort(key=lambda g: g[1])
        leftovers: dict[int, list[tuple[int, int]]] = {}
        for v in order:
            if v in assigned:
                continue
            b, s = found[v]
            leftovers.setdefault(b, []).append((s, v))
        for b in sorted(leftovers):
            claims.append(([v for _, v in sorted(leftovers[b])], b))
        return claims

    def insert_multi(self, q: int, located_neighbors: Iterable[tuple[int, Location]]) -> list[Location]:
        """Insert q connected to neighbors found at specific locations,
        grouped by plan_groups.  q must not already be present."""
        if q in self.vertex_index:
            raise UnknownNeighbor(f"vertex {q} already present")
        selected = list(located_neighbors)
        created = []
        for wi, bid in self.plan_groups(selected):
            created.extend(self.insert(q, wi, bid))
        if not selected:
            created.extend(self.insert(q))
        return created

    # -- neighbor enumeration -------------------------------------------

    def honeycomb_neighbors(self, loc: Location) -> list[tuple[int, Location]]:
        """Neighbors of the entry at loc: the single predecessor, the post_d
        successors, and for each parallel branch its second entry."""
        branch_id, seq = loc
        br = self.branches[branch_id]
        ent = br.entries[seq]
        out: list[tuple[int, Location]] = []
        if seq > 0:
            out.append((br.entries[seq - 1].vertex, (branch_id, seq - 1)))
        hi = seq + ent.post_d
        if hi >= len(br.entries):
            raise MalformedBranch(
                f"entry {ent.vertex}@{loc} has post_d {ent.post_d} past branch end"
            )
        for s in range(seq + 1, hi + 1):
            out.append((br.entries[s].vertex, (branch_id, s)))
        for side_id in sorted(ent.par_b):
            side = self.branches[side_id]
            if len(side.entries) > 1:
                out.append((side.entries[1].vertex, (side_id, 1)))
        return out

    # -- search -----------------------------------------------------------

    def _mark_vertex(self, v: int, found: Location,
                     trace: WalkTrace) -> list[Location]:
        """Evaluating a vertex marks every location it occupies (the visit
        bit guards vertex evaluations; locations are public metadata), the
        found location first."""
        marked = [found]
        self.entry(found).e = 1
        trace.steps.append((v, found))
        for loc in self.vertex_index[v]:
            if loc == found:
                continue
            ent = self.entry(loc)
            if not ent.e:
                ent.e = 1
                trace.steps.append((v, loc))
                marked.append(loc)
        return marked

    def search(self, dist: Callable[[int], int | float], theta: int,
               enter: Location) -> tuple[list[tuple[int, Location]], WalkTrace]:
        """Nearest-neighbor walk from `enter`, at most theta results.

        `dist` maps a vertex id to its distance from the query (smaller is
        closer).  Candidates are kept nearest-first; ties break on
        (vertex, branch, seq).  Each newly met vertex is evaluated once;
        all of its locations join the candidate queue so the walk can
        continue through any branch the vertex occupies.  A candidate
        sitting at a branch tail (post_d 0) is discarded and the next
        nearest extracted instead, which reroutes the walk around
        segmented branches.  Visit bits mark evaluations; the caller
        resets them between searches.

        Returns the result queue nearest-first (deduplicated by vertex) and
        the walk trace.
        """
        if not any(b.entries for b in self.branches.values()):
            raise EmptyBitgraph("no entries to search")
        if theta < 1:
            raise ValueError("theta must be at least 1")
        ev = self.entry(enter)
        if ev.e:
            raise RuntimeError("visit bits not reset before search")
        trace = WalkTrace()

        def key(vertex: int, loc: Location):
            return (dist(vertex), vertex, loc[0], loc[1])

        cand: list[tuple] = []           # heap, nearest first
        for loc in self._mark_vertex(ev.vertex, enter, trace):
            heapq.heappush(cand, key(ev.vertex, loc))
        start = key(ev.vertex, enter)
        results: list[tuple] = [start]   # sorted ascending, furthest last
        result_vertices = {ev.vertex}

        while cand:
            cur = heapq.heappop(cand)
            furthest = results[-1]
            if cur[0] > furthest[0]:
                break
            # at-hand-detour: skip branch-tail candidates (post_d 0); if no
            # alternative is left the tail itself is expanded (its lone
            # predecessor link), otherwise the walk would strand
            while self.entry((cur[2], cur[3])).post_d == 0 and cand:
                trace.detour_added += 1
                cur = heapq.heappop(cand)
            for v, vloc in self.honeycomb_neighbors((cur[2], cur[3])):
                if self.entry(vloc).e:
                    continue
                marked = self._mark_vertex(v, vloc, trace)
                k = key(v, vloc)
                if k[0] < results[-1][0] or len(results) < theta:
                    for loc in marked:
                        heapq.heappush(cand, key(v, loc))
                    if v not in result_vertices:
                        bisect.insort(results, k)
                        result_vertices.add(v)
                        if len(results) > theta:
                            dropped = results.pop()
                            result_vertices.discard(dropped[1])
        return [(v, (b, s)) for _, v, b, s in results], trace

    def reset_visit_bits(self):
        for br in self.branches.values():
            for ent in br.entries:
                ent.e = 0

    # -- serialization ----------------------------------------------------

    def to_lines(self) -> list[str]:
        """One entry per line: branch, seq, vertex, post_d, par_b csv (or -)."""
        lines = []
        for bid in sorted(self.branches):
            for ent in self.branches[bid].entries:
                pb = ",".join(str(x) for x in sorted(ent.par_b)) or "-"
                lines.append(f"{bid} {ent.seq} {ent.vertex} {ent.post_d} {pb}")
        return lines

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Bitgraph":
        bg = cls()
        rows = []
        for line in lines:
            line = line.strip()
            if not line:
                continue
            bid, seq, vertex, post_d, pb = line.split()
            par_b = set() if pb == "-" else {int(x) for x in pb.split(",")}
            rows.append((int(bid), int(seq), int(vertex), int(post_d), par_b))
        for bid, seq, vertex, post_d, par_b in sorted(rows):
            br = bg.branches.get(bid)
            if br is None:
                br = Branch(id=bid, entries=[])
                bg.branches[bid] = br
                bg._next_branch = max(bg._next_branch, bid + 1)
            if seq != len(br.entries):
                raise MalformedBranch(f"non-contiguous seq {seq} in branch {bid}")
            br.entries.append(BitgraphEntry(vertex=vertex, seq=seq,
                                            post_d=post_d, par_b=par_b))
            bg._register(vertex, (bid, seq))
        return bg


# -- conversion to and from ordered undirected graphs -----------------------


def partition_gamma(adj: Sequence[Iterable[int]]) -> Bitgraph:
    """Decompose an ordered undirected graph into branches.

    Vertices are replayed in order; each one is connected to its full set
    of earlier neighbors, grouped by the branch currently holding each
    neighbor's first location, and placed by the branch insertion rule.
    Every non-initial vertex must have at least one earlier neighbor.
    """
    bg = Bitgraph()
    for v in range(len(adj)):
        earlier = sorted(w for w in adj[v] if w < v)
        if v == 0:
            if earlier:
                raise DisconnectedVertex("vertex 0 cannot have earlier neighbors")
            bg.insert(v)
            continue
        if not earlier:
            raise DisconnectedVertex(f"vertex {v} has no earlier neighbor")
        bg.insert_multi(v, [(w, bg.primary_location(w)) for w in earlier])
    return bg


def reconstruct_graph(bg: Bitgraph) -> list[set[int]]:
    """Undo the branch decomposition: entry i is adjacent to the next
    post_d entries of its branch; the union over branches is the edge set."""
    if not bg.vertex_index:
        return []
    size = max(bg.vertex_index) + 1
    adj: list[set[int]] = [set() for _ in range(size)]
    for br in bg.branches.values():
        for ent in br.entries:
            hi = ent.seq + ent.post_d
            if hi >= len(br.entries):
                raise MalformedBranch(
                    f"entry {ent.vertex}@({br.id},{ent.seq}) spans past branch end"
                )
            for s in range(ent.seq + 1, hi + 1):
                other = br.entries[s].vertex
                adj[ent.vertex].add(other)
                adj[other].add(ent.vertex)
    return adj


def edge_set(adj: Sequence[Iterable[int]]) -> set[tuple[int, int]]:
    return {(min(u, v), max(u, v)) for u in range(len(adj)) for v in adj[u]}
