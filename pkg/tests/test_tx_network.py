import pytest

from helpers import LINE3, V, inst
from marpf.domain import GridMap
from marpf.tx_network import (
    TxEdge,
    agv_step_edges,
    build_networks,
    dump_edges,
    edge_cost,
    rack_step_edges,
)


@pytest.mark.parametrize("sx,sy,n_agv,n_rack", [(3, 1, 20, 7), (6, 4, 248, 100), (1, 1, 4, 1)])
def test_template_sizes(sx, sy, n_agv, n_rack):
    # per vertex: (1 + degree) same-layer edges on each layer plus load and unload
    g = GridMap(sx, sy)
    assert len(agv_step_edges(g)) == n_agv
    assert len(rack_step_edges(g)) == n_rack


def test_networks_repeat_template_per_layer():
    i = inst(LINE3)
    nets = build_networks(i, 5)
    assert len(nets.ag_edges) == 5 * 20
    assert len(nets.ar_edges) == 5 * 7
    assert len(nets.tr_edges) == 1
    assert nets.ag_edges[20].t == 1
    assert len(nets.nodes(layered=True)) == 6 * 3 * 2


def test_horizon_must_be_positive():
    with pytest.raises(ValueError):
        build_networks(inst(LINE3), 0)


def test_layer_change_edges_stay_in_place():
    for e in agv_step_edges(GridMap(2, 2)):
        if e.li != e.lo:
            assert e.vi == e.vo


def test_edge_costs():
    assert edge_cost(TxEdge(3, V(0, 0), V(0, 0), 1, 1)) == 0
    assert edge_cost(TxEdge(3, V(0, 0), V(1, 0), 0, 0)) == 4
    assert edge_cost(TxEdge(0, V(0, 0), V(0, 0), 0, 1)) == 1


def test_dump_format():
    text = dump_edges([TxEdge(2, V(0, 0), V(1, 0), 0, 0), TxEdge(0, V(1, 0), V(1, 0))])
    assert text == "2 0 0 0 -> 1 0 0 3\n0 1 0 - -> 1 0 - 0\n"
