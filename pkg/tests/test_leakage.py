import random
from fractions import Fraction

import pytest

from shareann import demo
from shareann.bitgraph import Bitgraph, partition_gamma
from shareann.field import FieldParams, KeyedPrg
from shareann.hnsw import squared_euclidean
from shareann.leakage import (
    CostLedger,
    UnknownElement,
    build_leakage_report,
    directed_connections,
    entry_term,
    expected_bitgraph_share_ops,
    expected_naive_share_ops,
    honeycomb_closure,
    leakage_interface_one,
    leakage_interface_three,
    leakage_interface_two,
    mss_size,
    share_bitgraph_index,
    share_graph_index,
)

BG = demo.build_bitgraph()
CED = 7  # repository size of the worked example


def random_graph(rng, n):
    adj = [set() for _ in range(n)]
    for v in range(1, n):
        for w in rng.sample(range(v), rng.randrange(1, min(v, 4) + 1)):
            adj[v].add(w)
            adj[w].add(v)
    return adj


# -- minimum sharable set -------------------------------------------------------


def test_mss_two_edge_graph():
    adj = demo.adjacency(3, demo.MINI_EDGES)
    assert mss_size(adj) == 4
    assert directed_connections(adj) == [(0, 1), (0, 2), (1, 0), (2, 0)]


def test_mss_edgeless():
    assert mss_size([set(), set()]) == 0


def test_mss_counts_double_edges():
    rng = random.Random(2)
    for _ in range(20):
        adj = random_graph(rng, rng.randrange(4, 60))
        edges = sum(len(s) for s in adj) // 2
        assert mss_size(adj) == 2 * edges


# -- sharing-cost counters ------------------------------------------------------


def test_share_index_counters_worked_example():
    params = FieldParams(n=3, t=2, rho=0)
    vectors = [[c % params.p for c in v] for v in demo.COORDS]
    naive = CostLedger("naive")
    share_graph_index(demo.adjacency(), vectors, params, KeyedPrg(1), naive)
    assert naive.index_units == 16
    assert naive.share_ops == expected_naive_share_ops(2, 3, 8) == 2 * 16 * 3

    bitg = CostLedger("bitgraph")
    share_bitgraph_index(BG, vectors, params, KeyedPrg(1), bitg)
    assert bitg.index_units == 9
    assert bitg.share_ops == expected_bitgraph_share_ops(2, 3, 9) == 2 * 9 * 3


def test_counters_monotone_snapshot():
    ledger = CostLedger("x", params={"d": 2})
    snap0 = ledger.snapshot()
    ledger.share_ops += 5
    ledger.recon_ops += 1
    snap1 = ledger.snapshot()
    assert snap1["share_ops"] > snap0["share_ops"]
    assert snap1["params"] == {"d": 2}


# -- privacy triplet -------------------------------------------------------------


def test_entry_terms_worked_example():
    assert [entry_term(BG, v) for v in range(7)] == [5, 3, 2, 2, 2, 2, 2]
    with pytest.raises(UnknownElement):
        entry_term(BG, 99)


def test_closure_worked_example():
    assert honeycomb_closure(BG, 0) == {1, 2, 3, 4, 5, 6}
    # slot-level deduction cannot jump between two slots of the same vertex,
    # so the closure seen from d stays on the a-d-f-g chain
    assert honeycomb_closure(BG, 3) == {0, 5, 6}
    assert honeycomb_closure(BG, 0, max_hops=1) == {1, 3}


def test_closure_singleton():
    bg = Bitgraph()
    bg.insert(0)
    assert honeycomb_closure(bg, 0) == set()
    assert leakage_interface_two(bg, 0, 0, 8) == Fraction(0)


def test_interface_one_values():
    assert leakage_interface_one(BG, 1, 0, CED) == Fraction(3, 7)
    assert leakage_interface_one(BG, 0, 0, CED) == Fraction(5, 7)
    assert leakage_interface_one(BG, 6, 0, CED) == Fraction(2, 7)
    # an isolated element in a repository of eight
    bg = Bitgraph()
    bg.insert(0)
    assert leakage_interface_one(bg, 0, 0, 8) == Fraction(1, 8)
    # extra layers multiply uniformly
    assert leakage_interface_one(BG, 1, 1, CED) == Fraction(6, 7)


def test_interface_two_values():
    assert leakage_interface_two(BG, 0, 0, CED) == Fraction(13, 7)
    assert leakage_interface_two(BG, 1, 0, CED) == Fraction(15, 7)
    assert leakage_interface_two(BG, 3, 0, CED) == Fraction(9, 7)


def test_interface_three_values_and_modes():
    ratio, qualified = leakage_interface_three(BG, 0, 0, CED, theta=2)
    assert ratio == Fraction(18, 7)
    assert qualified == 7  # closure plus the element itself
    dist = lambda w: squared_euclidean(demo.COORDS[0], demo.COORDS[w])
    ratio_d, qualified_d = leakage_interface_three(
        BG, 0, 0, CED, theta=150, theta_is_distance=True, dist_to=dist)
    assert ratio_d == ratio
    assert qualified_d == 2  # b at 100, d at 144
    with pytest.raises(ValueError):
        leakage_interface_three(BG, 0, 0, CED, theta=1, theta_is_distance=True)


def test_triplet_monotonicity_and_bounds():
    rng = random.Random(9)
    for _ in range(15):
        adj = random_graph(rng, rng.randrange(5, 50))
        bg = partition_gamma(adj)
        ced = len(adj)
        for v in range(0, len(adj), 7):
            one = leakage_interface_one(bg, v, 0, ced)
            two = leakage_interface_two(bg, v, 0, ced)
            three, _ = leakage_interface_three(bg, v, 0, ced, theta=3)
            assert one >= 0 and two >= 0
            assert three == two + one  # one extra summand, the element itself
            assert one <= three and two <= three
            if len(bg.locations(v)) == 1:
                # single-slot elements reveal at most their degree-sized
                # neighborhood per layer
                assert one <= 1


def test_leakage_report():
    report = build_leakage_report(
        BG, 0, CED, elements=range(7), theta=2,
        dist_between=lambda a, b: squared_euclidean(demo.COORDS[a], demo.COORDS[b]))
    assert len(report.samples) == 7
    assert report.epsilon == Fraction(18, 7)  # worst interface-three ratio
    blob = report.to_jsonable()
    assert blob["epsilon"] == "18/7"
    assert blob["samples"][1]["interface_one"] == "3/7"
    assert report.samples[1]["element"] == 1
