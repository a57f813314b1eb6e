import random

import pytest

from shareann import demo
from shareann.bitgraph import (
    Bitgraph,
    DisconnectedVertex,
    EmptyBitgraph,
    MalformedBranch,
    UnknownNeighbor,
    edge_set,
    partition_gamma,
    reconstruct_graph,
)
from shareann.hnsw import brute_force_ann, squared_euclidean


def entries_of(bg, bid):
    return [(e.vertex, e.seq, e.post_d, set(e.par_b))
            for e in bg.branches[bid].entries]


def build_random_graph(rng, n, max_neighbors=5):
    """Random insertion-ordered connected graph: every vertex links to a
    nonempty random subset of earlier vertices."""
    adj = [set() for _ in range(n)]
    for v in range(1, n):
        k = rng.randrange(1, min(v, max_neighbors) + 1)
        for w in rng.sample(range(v), k):
            adj[v].add(w)
            adj[w].add(v)
    return adj


def seq_insert_bitgraph(vectors, m, metric=squared_euclidean):
    """Sequential nearest-neighbor builder used as the module-level index
    oracle: each vertex links to its m closest predecessors."""
    bg = Bitgraph()
    for vid, vec in enumerate(vectors):
        if vid == 0:
            bg.insert(vid)
            continue
        order = sorted(range(vid), key=lambda w: (metric(vectors[w], vec), w))
        chosen = order[:m]
        bg.insert_multi(vid, [(w, bg.enter_location(w)) for w in chosen])
    return bg


# -- partition ---------------------------------------------------------------


def test_partition_worked_example():
    bg = demo.build_bitgraph()
    assert len(bg.branches) == 2
    assert entries_of(bg, 0) == demo.EXPECTED_BRANCHES[0]
    assert entries_of(bg, 1) == demo.EXPECTED_BRANCHES[1]
    # the two anchor entries
    a = bg.entry((0, 0))
    assert (a.vertex, a.seq, a.post_d, a.par_b) == (0, 0, 1, {1})
    b = bg.entry((0, 1))
    assert (b.vertex, b.seq, b.post_d, b.par_b) == (1, 1, 2, set())
    assert bg.total_entries == 9
    assert bg.duplicate_count == 2


def test_partition_single_path():
    bg = partition_gamma([{1}, {0, 2}, {1}])
    assert entries_of(bg, 0) == [(0, 0, 1, set()), (1, 1, 1, set()),
                                 (2, 2, 0, set())]
    assert len(bg.branches) == 1


def test_partition_rejects_disconnected():
    with pytest.raises(DisconnectedVertex):
        partition_gamma([set(), set(), {1}])


# -- reconstruction ----------------------------------------------------------


def test_reconstruct_worked_example():
    adj = reconstruct_graph(demo.build_bitgraph())
    assert edge_set(adj) == {tuple(sorted(e)) for e in demo.EDGES}


def test_reconstruct_single_entry():
    bg = Bitgraph()
    bg.insert(0)
    adj = reconstruct_graph(bg)
    assert adj == [set()]


def test_reconstruct_malformed():
    bg = Bitgraph()
    bg.insert(0)
    bg.entry((0, 0)).post_d = 3  # spans past the branch end
    with pytest.raises(MalformedBranch):
        reconstruct_graph(bg)


def test_partition_reconstruct_identity_random():
    rng = random.Random(17)
    for _ in range(100):
        n = rng.randrange(3, 200)
        adj = build_random_graph(rng, n)
        bg = partition_gamma(adj)
        assert edge_set(reconstruct_graph(bg)) == edge_set(adj)


def test_entry_count_bounds():
    rng = random.Random(23)
    for _ in range(40):
        n = rng.randrange(3, 120)
        adj = build_random_graph(rng, n)
        bg = partition_gamma(adj)
        edges = len(edge_set(adj))
        assert bg.total_entries == bg.vertex_count + bg.duplicate_count
        assert bg.total_entries <= 2 * edges
        # one duplicate entry per extra branch appearance
        assert bg.duplicate_count >= len(bg.branches) - 1


# -- insertion ----------------------------------------------------------------


def test_insert_extends_branch():
    bg = demo.build_bitgraph()
    created = bg.insert(7, [4, 6], 0)  # e and g; g is the branch tail
    assert created == [(0, 5)]
    assert bg.entry((0, 3)).post_d == 2  # e: 1 -> 2
    assert bg.entry((0, 4)).post_d == 1  # g: 0 -> 1
    tail = bg.entry((0, 5))
    assert (tail.vertex, tail.seq, tail.post_d, tail.par_b) == (7, 5, 0, set())
    assert len(bg.branches) == 2


def test_insert_splits_new_branch():
    bg = demo.build_bitgraph()
    created = bg.insert(7, [1], 0)  # b alone, not the tail
    assert created == [(2, 1)]
    assert entries_of(bg, 2) == [(1, 0, 1, set()), (7, 1, 0, set())]
    assert bg.entry((0, 1)).par_b == {2}


def test_insert_empty_base_case():
    bg = Bitgraph()
    created = bg.insert(5)
    assert created == [(0, 0)]
    ent = bg.entry((0, 0))
    assert (ent.vertex, ent.seq, ent.post_d, ent.par_b) == (5, 0, 0, set())


def test_insert_unknown_neighbor():
    bg = demo.build_bitgraph()
    with pytest.raises(UnknownNeighbor):
        bg.insert(7, [3], 0)  # d lives in branch 1 only
    with pytest.raises(UnknownNeighbor):
        bg.insert(7, [1], 99)


def test_plan_groups_claims_suffixes():
    bg = demo.build_bitgraph()
    # e and g span to branch 0's tail once extended; f is branch 1's tail
    groups = bg.plan_groups([(4, (0, 3)), (6, (0, 4)), (5, (1, 2))])
    assert ([4, 6], 0) in groups
    assert ([5], 1) in groups or ([5, 6], 1) in groups


# -- honeycomb ----------------------------------------------------------------


def test_honeycomb_interior():
    bg = demo.build_bitgraph()
    assert bg.honeycomb_neighbors((0, 2)) == [(1, (0, 1)), (4, (0, 3))]


def test_honeycomb_head_with_parallel():
    bg = demo.build_bitgraph()
    assert bg.honeycomb_neighbors((0, 0)) == [(1, (0, 1)), (3, (1, 1))]


def test_honeycomb_tail():
    bg = demo.build_bitgraph()
    assert bg.honeycomb_neighbors((0, 4)) == [(4, (0, 3))]


def test_honeycomb_malformed():
    bg = Bitgraph()
    bg.insert(0)
    bg.entry((0, 0)).post_d = 2
    with pytest.raises(MalformedBranch):
        bg.honeycomb_neighbors((0, 0))


# -- search -------------------------------------------------------------------


def test_search_single_vertex():
    bg = Bitgraph()
    bg.insert(0)
    res, trace = bg.search(lambda v: 0, 3, (0, 0))
    assert res == [(0, (0, 0))]
    assert trace.vertex_set == {0}


def test_search_empty():
    with pytest.raises(EmptyBitgraph):
        Bitgraph().search(lambda v: 0, 1, (0, 0))


def test_search_detour_scenario():
    # query nearest to e and g, entering at a: the forward walk strands on
    # branch tails and the detour reroutes through the candidate queue
    bg = demo.build_bitgraph()
    q = (17, -11)
    dist = lambda v: squared_euclidean(demo.COORDS[v], q)
    res, trace = bg.search(dist, 2, (0, 0))
    ids = [v for v, _ in res]
    assert ids == brute_force_ann(q, demo.COORDS, 2)
    assert set(ids) == {4, 6}  # e and g
    assert trace.detour_added >= 1


def test_search_matches_brute_force_on_random_points():
    rng = random.Random(41)
    vectors = [(rng.randrange(-1000, 1000), rng.randrange(-1000, 1000))
               for _ in range(200)]
    bg = seq_insert_bitgraph(vectors, m=8)
    scores = []
    for _ in range(50):
        q = (rng.randrange(-1000, 1000), rng.randrange(-1000, 1000))
        dist = lambda v: squared_euclidean(vectors[v], q)
        res, _ = bg.search(dist, 5, bg.enter_location(0))
        bg.reset_visit_bits()
        found = {v for v, _ in res}
        truth = set(brute_force_ann(q, vectors, 5))
        scores.append(len(found & truth) / len(found | truth))
    assert sum(scores) / len(scores) >= 0.6


def test_search_no_repeated_locations():
    rng = random.Random(43)
    vectors = [(rng.randrange(-100, 100), rng.randrange(-100, 100))
               for _ in range(80)]
    bg = seq_insert_bitgraph(vectors, m=5)
    q = (3, -7)
    res, trace = bg.search(lambda v: squared_euclidean(vectors[v], q), 6,
                           bg.enter_location(0))
    assert len(trace.steps) == len(set(trace.steps))
    assert len(res) == len({v for v, _ in res})


def test_visit_bits_reset_and_determinism():
    bg = demo.build_bitgraph()
    dist = lambda v: squared_euclidean(demo.COORDS[v], (5, -5))
    res1, trace1 = bg.search(dist, 3, (0, 0))
    assert any(e.e for br in bg.branches.values() for e in br.entries)
    bg.reset_visit_bits()
    assert all(e.e == 0 for br in bg.branches.values() for e in br.entries)
    bg.reset_visit_bits()  # idempotent
    assert all(e.e == 0 for br in bg.branches.values() for e in br.entries)
    res2, trace2 = bg.search(dist, 3, (0, 0))
    bg.reset_visit_bits()
    assert res1 == res2
    assert trace1.steps == trace2.steps
    assert trace1.detour_added == trace2.detour_added


def test_search_requires_reset():
    bg = demo.build_bitgraph()
    dist = lambda v: v
    bg.search(dist, 2, (0, 0))
    with pytest.raises(RuntimeError):
        bg.search(dist, 2, (0, 0))


# -- serialization -------------------------------------------------------------


def test_serialization_golden_and_roundtrip():
    bg = demo.build_bitgraph()
    lines = bg.to_lines()
    assert lines == demo.GOLDEN_LINES
    back = Bitgraph.from_lines(lines)
    assert back.to_lines() == lines
    assert back.vertex_index == bg.vertex_index
    assert edge_set(reconstruct_graph(back)) == edge_set(reconstruct_graph(bg))


def test_deserialization_rejects_gaps():
    with pytest.raises(MalformedBranch):
        Bitgraph.from_lines(["0 0 0 1 -", "0 2 1 0 -"])
