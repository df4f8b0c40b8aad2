"""Construction, canonical ordering, and validation of quotient graphs."""

import numpy as np
import pytest

from periwalk import (
    BrokenPath,
    DanglingEdge,
    DuplicateEdge,
    DuplicateNode,
    NonPositiveRate,
    NotStronglyConnected,
    SelfEdge,
    build_quotient_graph,
    lift_displacement,
    project_edges,
)


def two_node_chain():
    # 1-d: nodes at 0 and 1/2, hops of +-1/2 both ways
    return build_quotient_graph(
        1,
        [(0.0,), (0.5,)],
        [(0, (0.5,), 2.0), (0, (-0.5,), 3.0),
         (1, (0.5,), 5.0), (1, (-0.5,), 7.0)],
    )


def test_nodes_sorted_lexicographically():
    g = build_quotient_graph(
        2,
        [(0.5, 0.5), (0.0, 0.5), (0.0, 0.0), (0.5, 0.0)],
        [(i, jump, 1.0) for i in range(4)
         for jump in ((0.5, 0.0), (0.0, 0.5))],
    )
    coords = g.coords_array()
    keys = [tuple(c) for c in coords]
    assert keys == sorted(keys)


def test_edges_sorted_within_origin_blocks():
    g = two_node_chain()
    keys = [(e.origin, tuple(e.jump)) for e in g.edges]
    assert keys == sorted(keys)
    for i, e in enumerate(g.edges):
        assert e.index == i


def test_coordinates_wrap_into_unit_cell():
    g = build_quotient_graph(
        1, [(1.25,), (-0.25,)],
        [(0, (0.5,), 1.0), (1, (-0.5,), 1.0)],
    )
    coords = sorted(float(nd.coords[0]) for nd in g.nodes)
    assert coords == pytest.approx([0.25, 0.75])


def test_canonical_form_independent_of_input_order():
    from periwalk import dump_graph

    a = build_quotient_graph(
        1, [(0.0,), (0.5,)],
        [(0, (0.5,), 2.0), (0, (-0.5,), 3.0),
         (1, (0.5,), 5.0), (1, (-0.5,), 7.0)],
    )
    b = build_quotient_graph(
        1, [(0.5,), (0.0,)],
        [(1, (-0.5,), 3.0), (0, (-0.5,), 7.0),
         (1, (0.5,), 2.0), (0, (0.5,), 5.0)],
    )
    assert dump_graph(a) == dump_graph(b)


def test_terminal_resolution_wraps_modulo_one():
    g = two_node_chain()
    # node 1 at 1/2 jumping +1/2 lands on node 0 through the boundary
    e = next(e for e in g.edges if e.origin == 1 and e.jump[0] > 0)
    assert e.terminal == 0


def test_node_at_snapping_and_wraparound():
    g = two_node_chain()
    assert g.node_at((0.5 + 2e-10,)) == 1
    assert g.node_at((1.0 - 2e-10,)) == 0
    assert g.node_at((-1e-10,)) == 0
    assert g.node_at((0.25,)) is None


def test_reversal_links_are_mutual():
    g = two_node_chain()
    for e in g.edges:
        assert e.reversal is not None
        back = g.edges[e.reversal]
        assert back.reversal == e.index
        assert back.origin == e.terminal
        assert np.allclose(back.jump, -e.jump)


def test_one_way_cycle_has_no_reversals():
    # 1-d three-node rotor: every hop is +1/3
    g = build_quotient_graph(
        1, [(0.0,), (1 / 3,), (2 / 3,)],
        [(i, (1 / 3,), 1.0) for i in range(3)],
    )
    assert all(e.reversal is None for e in g.edges)


def test_full_period_jump_is_legal_and_kept():
    g = build_quotient_graph(
        1, [(0.0,)],
        [(0, (1.0,), 2.0), (0, (-1.0,), 2.0), (0, (2.0,), 0.5)],
    )
    assert g.n_edges == 3
    assert all(e.origin == e.terminal == 0 for e in g.edges)
    assert g.total_rate()[0] == pytest.approx(4.5)


def test_arrays_view_matches_edge_list():
    g = two_node_chain()
    arr = g.arrays()
    assert arr.indptr.tolist() == [0, 2, 4]
    assert np.array_equal(arr.origins, [0, 0, 1, 1])
    np.testing.assert_allclose(arr.lam0, g.total_rate())
    # cumulative rates restart at each origin block
    for y in range(g.n_nodes):
        lo, hi = arr.indptr[y], arr.indptr[y + 1]
        np.testing.assert_allclose(arr.cum_rates[lo:hi],
                                   np.cumsum(arr.rates[lo:hi]))


def test_zero_jump_rejected():
    with pytest.raises(SelfEdge):
        build_quotient_graph(1, [(0.0,)], [(0, (0.0,), 1.0)])


def test_coincident_nodes_rejected():
    with pytest.raises(DuplicateNode):
        build_quotient_graph(
            1, [(0.0,), (1.0 - 1e-12,)], [(0, (0.5,), 1.0)])


def test_empty_node_list_rejected():
    with pytest.raises(DuplicateNode):
        build_quotient_graph(1, [], [])


def test_repeated_jump_from_one_origin_rejected():
    with pytest.raises(DuplicateEdge):
        build_quotient_graph(
            1, [(0.0,), (0.5,)],
            [(0, (0.5,), 1.0), (0, (0.5,), 2.0), (1, (0.5,), 1.0)])


def test_jump_landing_on_no_node_rejected():
    with pytest.raises(DanglingEdge):
        build_quotient_graph(
            1, [(0.0,), (0.5,)], [(0, (0.25,), 1.0)])


def test_unknown_origin_index_rejected():
    with pytest.raises(DanglingEdge):
        build_quotient_graph(1, [(0.0,)], [(3, (1.0,), 1.0)])


def test_wrong_jump_dimension_rejected():
    with pytest.raises(DanglingEdge):
        build_quotient_graph(2, [(0.0, 0.0)], [(0, (1.0,), 1.0)])


@pytest.mark.parametrize("rate", [0.0, -1.0, float("nan"), float("inf"), "fast"])
def test_bad_rates_rejected(rate):
    with pytest.raises(NonPositiveRate):
        build_quotient_graph(1, [(0.0,)], [(0, (1.0,), rate)])


def test_unreachable_node_rejected():
    # node 1 keeps itself busy with a full-period hop but never returns to 0
    with pytest.raises(NotStronglyConnected):
        build_quotient_graph(
            1, [(0.0,), (0.5,)],
            [(0, (0.5,), 1.0), (1, (1.0,), 1.0)])


def test_lift_displacement_sums_jumps_along_path():
    g = two_node_chain()
    up = next(e.index for e in g.edges if e.origin == 0 and e.jump[0] > 0)
    back = g.edges[up].reversal
    disp = lift_displacement(g, [up, back, up])
    assert disp[0] == pytest.approx(0.5)
    assert lift_displacement(g, [])[0] == 0.0


def test_lift_displacement_rejects_broken_chains():
    g = two_node_chain()
    up = next(e.index for e in g.edges if e.origin == 0 and e.jump[0] > 0)
    with pytest.raises(BrokenPath):
        lift_displacement(g, [up, up])


def test_projection_collapses_parallel_edges():
    # both hops from node 0 land on node 1, once directly and once wrapped
    g = two_node_chain()
    proj = project_edges(g)
    assert not proj.bijective
    assert sorted(proj.pairs) == [(0, 1), (1, 0)]
    assert proj.kappa.shape == (4,)
    np.testing.assert_allclose(sorted(proj.aggregated_rate), [5.0, 12.0])
    for e in g.edges:
        assert proj.pairs[proj.kappa[e.index]] == (e.origin, e.terminal)
    assert proj.commutes_with_reversals


def test_projection_detects_reversal_mismatch():
    # a->b and b->a exist as node pairs, but both jumps point the same way,
    # so neither edge is the other's reversal
    g = build_quotient_graph(
        1, [(0.0,), (0.5,)],
        [(0, (0.5,), 1.0), (1, (0.5,), 1.0)])
    proj = project_edges(g)
    assert not proj.commutes_with_reversals
    assert proj.bijective


def test_whirlpool_projection_is_bijective(whirlpool):
    proj = project_edges(whirlpool)
    assert proj.bijective
    assert len(proj.pairs) == 8
