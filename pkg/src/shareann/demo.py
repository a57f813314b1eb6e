"""The seven-vertex worked example used for golden-file checks.

Vertices are lettered a..g in insertion order (ids 0..6).  The graph has
two chains leaving a — a-b-c-e-g above, a-d-f-g below — with the extra
rung b-e, eight edges in total.  Partitioning it yields two branches of
nine entries, against sixteen directed-connection units for naive sharing.

COORDS places the vertices so that radius-filtered closest-first selection
(squared radius RADIUS_SQ, at most M_FORCING neighbors) reproduces exactly
this edge set when the vertices are inserted in order, which lets the full
insertion pipelines rebuild the example end to end.
"""
from __future__ import annotations

from .bitgraph import Bitgraph, partition_gamma

LETTERS = "abcdefg"

EDGES = [(0, 1), (1, 2), (1, 4), (2, 4), (0, 3), (3, 5), (4, 6), (5, 6)]

# entries as (vertex, seq, post_d, par_b)
EXPECTED_BRANCHES = {
    0: [(0, 0, 1, {1}), (1, 1, 2, set()), (2, 2, 1, set()),
        (4, 3, 1, set()), (6, 4, 0, set())],
    1: [(0, 0, 1, set()), (3, 1, 1, set()), (5, 2, 1, set()),
        (6, 3, 0, set())],
}

GOLDEN_LINES = [
    "0 0 0 1 1",
    "0 1 1 2 -",
    "0 2 2 1 -",
    "0 3 4 1 -",
    "0 4 6 0 -",
    "1 0 0 1 -",
    "1 1 3 1 -",
    "1 2 5 1 -",
    "1 3 6 0 -",
]

# integer 2-D coordinates: pairs within squared distance RADIUS_SQ are
# exactly the eight edges above
COORDS = [(0, 0), (10, 0), (16, 6), (0, -12), (16, -6), (8, -20), (16, -16)]
RADIUS_SQ = 144
M_FORCING = 2

# two-edge mini graph (a-b, a-c) used by the sharing-cost examples
MINI_EDGES = [(0, 1), (0, 2)]


def adjacency(n: int = 7, edges=EDGES) -> list[set[int]]:
    adj: list[set[int]] = [set() for _ in range(n)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def build_bitgraph() -> Bitgraph:
    return partition_gamma(adjacency())


def lettered_lines(bg: Bitgraph) -> list[str]:
    out = []
    for bid in sorted(bg.branches):
        row = ", ".join(
            f"({LETTERS[e.vertex]},{e.seq},{e.post_d},"
            f"{{{','.join('H%d' % (b + 1) for b in sorted(e.par_b)) or ''}}})"
            for e in bg.branches[bid].entries
        )
        out.append(f"H{bid + 1}: [{row}]")
    return out
