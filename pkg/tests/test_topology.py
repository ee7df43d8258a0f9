import json
import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantumness.topology import (
    AL,
    C2C,
    ML,
    STAGES,
    QubitPath,
    Rectangle,
    TopologyError,
    check_path,
    eagle_descriptor,
    enumerate_paths,
    extend_backwards,
    heron_descriptor,
    load_device,
    partition_rectangles,
    swap_distance,
)


def induced(topo, qubits):
    g = nx.Graph()
    g.add_nodes_from(qubits)
    g.add_edges_from(e for e in topo.edges if e[0] in qubits and e[1] in qubits)
    return g


def test_builtin_devices(eagle, heron, ibex):
    assert (eagle.num_qubits, heron.num_qubits, ibex.num_qubits) == (127, 156, 12)
    assert ibex.all_to_all and not heron.all_to_all
    assert heron.kind == "lattice" and ibex.kind == "all_to_all"


def test_rectangle_counts(eagle, heron):
    assert len(partition_rectangles(eagle)) == 18
    assert len(partition_rectangles(heron)) == 21


def test_rectangles_are_chordless_cycles(heron_rects, heron):
    for r in heron_rects:
        g = induced(heron, r.qubits)
        assert g.number_of_edges() == 12
        assert all(d == 2 for _, d in g.degree())
        assert nx.is_connected(g)


def test_rectangle_indices_row_major(heron, heron_rects):
    assert [r.index for r in heron_rects] == list(range(1, 22))
    first = [heron.embedding[r.cycle[0]] for r in heron_rects]
    assert first == sorted(first)


def test_all_to_all_has_no_rectangles(ibex):
    with pytest.raises(TopologyError, match="rectangles undefined"):
        partition_rectangles(ibex)


@pytest.mark.parametrize("stage,count", [(C2C, 8), (ML, 24), (AL, 144)])
def test_path_counts_every_rectangle(eagle, heron, stage, count):
    for topo in (eagle, heron):
        for r in partition_rectangles(topo):
            assert len(enumerate_paths(r, stage)) == count


def test_paths_are_device_paths_inside_rectangle(heron, heron_rects):
    for r in heron_rects[:5]:
        for st_ in STAGES:
            for p in enumerate_paths(r, st_):
                check_path(heron, p)
                assert set(p.qubits) <= r.qubits
                assert 1 <= p.swaps <= 6
                assert p.stage == st_


def test_c2c_connects_opposite_corners(heron_rects):
    r = heron_rects[0]
    c = r.corners
    pairs = {(p.start, p.end) for p in enumerate_paths(r, C2C)}
    assert pairs == {(c[0], c[2]), (c[2], c[0]), (c[1], c[3]), (c[3], c[1])}
    assert all(p.swaps == 6 for p in enumerate_paths(r, C2C))


def test_ml_paths_are_maximal(heron_rects):
    assert all(len(p) == 7 for p in enumerate_paths(heron_rects[3], ML))


def test_al_matches_brute_force_shortest_paths(heron, heron_rects):
    for r in heron_rects:
        g = induced(heron, r.qubits)
        expected = set()
        for a in r.qubits:
            for b in r.qubits:
                if a != b:
                    expected |= {tuple(p) for p in nx.all_shortest_paths(g, a, b)}
        got = [p.qubits for p in enumerate_paths(r, AL)]
        assert len(got) == len(set(got))
        assert set(got) == expected


def test_paths_deterministic(heron_rects):
    r = heron_rects[7]
    assert enumerate_paths(r, AL) == enumerate_paths(r, AL)


def test_unknown_stage(heron_rects):
    with pytest.raises(TopologyError):
        enumerate_paths(heron_rects[0], "XL")


@settings(max_examples=15, deadline=None)
@given(st.randoms(use_true_random=False))
def test_edge_order_does_not_change_rectangles(rnd):
    desc = heron_descriptor()
    base = partition_rectangles(load_device(desc))
    edges = [list(e) for e in desc["connectivity"]]
    rnd.shuffle(edges)
    desc["connectivity"] = [e[::-1] if rnd.random() < 0.5 else e for e in edges]
    assert partition_rectangles(load_device(desc)) == base


def test_rectangle_override(tmp_path):
    cyc = list(range(12))
    desc = {
        "name": "ring",
        "num_qubits": 12,
        "connectivity": [[i, (i + 1) % 12] for i in range(12)],
        "rectangles": [{"index": 1, "cycle": cyc, "corners": [0, 4, 6, 10]}],
    }
    path = tmp_path / "ring.json"
    path.write_text(json.dumps(desc))
    topo = load_device(path)
    (r,) = partition_rectangles(topo)
    assert len(enumerate_paths(r, AL)) == 144


@pytest.mark.parametrize(
    "desc,msg",
    [
        ({"name": "x", "num_qubits": 2}, "missing field"),
        ({"name": "x", "num_qubits": 2, "connectivity": [[0, 0]]}, "self-loop"),
        ({"name": "x", "num_qubits": 2, "connectivity": [[0, 5]]}, "out of range"),
        ({"name": "x", "num_qubits": 3, "connectivity": [[0, 1]]}, "disconnected"),
        ({"name": "x", "num_qubits": 3, "connectivity": "mesh"}, "connectivity"),
    ],
)
def test_invalid_descriptors(desc, msg):
    with pytest.raises(TopologyError, match=msg):
        load_device(desc)


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(TopologyError, match="invalid JSON"):
        load_device(p)


def test_rectangle_validation():
    with pytest.raises(TopologyError, match="12 distinct"):
        Rectangle(1, tuple(range(11)), (0, 4, 6, 10))
    with pytest.raises(TopologyError, match="antipodal"):
        Rectangle(1, tuple(range(12)), (0, 4, 5, 10))


def test_qubit_path_validation():
    with pytest.raises(TopologyError):
        QubitPath((3,))
    with pytest.raises(TopologyError, match="revisits"):
        QubitPath((1, 2, 1))


def test_swap_distance(ibex, heron, heron_rects):
    assert swap_distance(ibex, 0, 11) == 1
    p = enumerate_paths(heron_rects[0], C2C)[0]
    assert swap_distance(heron, p.start, p.end, p) == 6
    assert swap_distance(heron, p.start, p.end) == 6
    with pytest.raises(TopologyError):
        swap_distance(heron, 3, 3)


def test_extend_backwards(heron_rects):
    r = heron_rects[0]
    p = QubitPath(r.cycle[2:6])
    assert extend_backwards(r, p, 2) == r.cycle[0:6]
    rev = QubitPath(tuple(reversed(r.cycle[2:6])))
    assert extend_backwards(r, rev, 1) == (r.cycle[6],) + rev.qubits
    with pytest.raises(TopologyError):
        extend_backwards(r, QubitPath(r.cycle[:7]), 6)


def test_eagle_descriptor_shape():
    d = eagle_descriptor()
    assert d["num_qubits"] == 127
    assert len(d["connectivity"]) == 144
