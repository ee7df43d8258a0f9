from fractions import Fraction

import pytest

from quantumness import circuit as qc
from quantumness import protocols as pr
from quantumness.fidelity import instance_fidelity
from quantumness.protocols import ProtocolError, ProtocolKind
from quantumness.simulator import density_oracle
from quantumness.topology import AL, C2C, ML, QubitPath, enumerate_paths


def oracle_fidelity(inst, device=None, noise=None):
    outcomes = {s.label: density_oracle(c, noise, device) for s, c in inst.circuits()}
    return instance_fidelity(inst.kind, outcomes)[0]


def test_labels_round_trip():
    for kind in pr.TABLE_ORDER:
        assert pr.parse_kind(kind.label) == kind
    assert [k.label for k in pr.TABLE_ORDER] == [
        "transmit", "gen_transmit_m2", "gen_transmit_m3", "do_nothing",
        "gen_do_nothing_m2", "gen_do_nothing_m3", "bell", "cat_m3_j2", "cat_m4_j2",
    ]


@pytest.mark.parametrize(
    "args",
    [("teleport",), (pr.GEN_TRANSMIT, 4), (pr.GEN_TRANSMIT, 1), (pr.CAT, 3, 1), (pr.CAT, 5, 2), (pr.TRANSMIT, 2)],
)
def test_invalid_kinds(args):
    with pytest.raises(ProtocolError):
        ProtocolKind(*args)


def test_thresholds_exact():
    assert pr.threshold_for(ProtocolKind(pr.TRANSMIT)) == 2 / 3
    assert pr.threshold_for(ProtocolKind(pr.DO_NOTHING)) == 2 / 3
    assert pr.threshold_for(ProtocolKind(pr.BELL)) == 0.5
    assert pr.threshold_for(ProtocolKind(pr.GEN_TRANSMIT, 2)) == float(Fraction(4, 9))
    assert pr.threshold_for(ProtocolKind(pr.GEN_DO_NOTHING, 3)) == float(Fraction(8, 27))
    assert pr.threshold_for(ProtocolKind(pr.CAT, 3, 2)) == 0.5
    assert pr.threshold_for(ProtocolKind(pr.CAT, 4, 2), cat_threshold=0.6) == 0.6


def test_register_sizes():
    cat = ProtocolKind(pr.CAT, 4, 2)
    assert (cat.work_qubits, cat.moved_qubits, cat.required_qubits) == (4, 2, 6)
    g3 = ProtocolKind(pr.GEN_DO_NOTHING, 3)
    assert (g3.work_qubits, g3.required_qubits, g3.returns) == (3, 6, True)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_transfer_settings_cover_axial_states(m):
    settings = pr.transfer_settings(m)
    assert len(settings) == 6
    for i in range(m):
        assert sorted(s.axial[i] for s in settings) == sorted(pr.AXIAL)
    assert len({s.label for s in settings}) == 6


def test_expected_bits():
    s = pr.Setting("x", axial=(("X", 1), ("Y", -1), ("Z", -1)))
    assert s.expected_bits == "011"


def test_cat_settings():
    assert [s.label for s in pr.cat_settings(3)] == ["pop", "par0", "par1", "par2"]


def test_transmit_structure():
    c = pr.build_transmit((4, 7, 9), pr.transfer_settings()[2])
    assert c.gates[0] == qc.prepare(4, "X", 1)
    assert [g for g in c.gates if g.kind == qc.SWAP] == [qc.swap(4, 7), qc.swap(7, 9)]
    assert c.gates[-1] == qc.basis_rotation(9, "X")
    assert c.measured == (9,)


def test_do_nothing_returns_and_measures_start():
    c = pr.build_do_nothing((4, 7, 9), pr.transfer_settings()[0])
    assert c.count(qc.SWAP) == 4
    assert c.measured == (4,)


def test_generalized_measures_all_work_qubits():
    s = pr.transfer_settings(2)[1]
    c = pr.build_gen_transmit([(1, 2, 3), (0, 1, 2)], s)
    assert c.measured == (3, 2)
    d = pr.build_gen_do_nothing([(1, 2, 3), (0, 1, 2)], s)
    assert d.measured == (1, 0)


def test_generalized_errors():
    with pytest.raises(ProtocolError, match="M in 2..3"):
        pr.build_gen_transmit([(0, 1)], pr.transfer_settings(1)[0])
    with pytest.raises(ProtocolError, match="does not match"):
        pr.build_gen_transmit([(0, 1), (2, 3)], pr.transfer_settings(3)[0])


def test_path_collision_detected():
    # the second chain drags the first state back out of its end qubit
    with pytest.raises(ProtocolError, match="path collision"):
        pr.build_gen_transmit([(0, 1, 2), (3, 2, 1)], pr.transfer_settings(2)[0])
    with pytest.raises(ProtocolError, match="path collision"):
        pr.build_gen_transmit([(0, 1), (0, 2)], pr.transfer_settings(2)[0])


def test_bell_errors():
    s = pr.BELL_SETTINGS[0]
    with pytest.raises(ProtocolError, match="identical endpoints"):
        pr.build_bell_transfer((0, 1), (1, 0), [(0, 1), (1, 0)], s)
    with pytest.raises(ProtocolError, match="do not connect"):
        pr.build_bell_transfer((0, 1), (2, 3), [(0, 2), (1, 4)], s)


def test_cat_errors():
    s = pr.cat_settings(3)[0]
    with pytest.raises(ProtocolError, match="unsupported J"):
        pr.build_cat_state((0, 1, 2), (1,), [(1, 3)], s)
    with pytest.raises(ProtocolError, match="subset"):
        pr.build_cat_state((0, 1, 2), (1, 5), [(1, 3), (5, 4)], s)


def test_cat_gate_layout():
    c = pr.build_cat_state((0, 1, 2), (1, 2), [(2, 4), (1, 3)], pr.cat_settings(3)[2])
    assert c.gates[:3] == (qc.hadamard(0), qc.cx(0, 1), qc.cx(1, 2))
    assert c.measured == (0, 3, 4)
    assert c.count(qc.ROT) == 3


def test_all_to_all_instance_counts():
    qs = range(12)
    assert len(pr.all_to_all_instances(ProtocolKind(pr.TRANSMIT), qs)) == 132
    bell = pr.all_to_all_instances(ProtocolKind(pr.BELL), qs)
    assert len(bell) == 66 * 45
    capped = pr.all_to_all_instances(ProtocolKind(pr.BELL), qs, max_alice=2)
    assert len(capped) == 66 * 2
    for inst in capped:
        assert not set(inst.alice) & set(inst.bob)
        assert inst.camp == tuple(sorted(inst.bob))
    assert pr.all_to_all_instances(ProtocolKind(pr.GEN_TRANSMIT, 3), range(5)) == []


def test_all_to_all_cat_routing():
    inst = pr.all_to_all_instances(ProtocolKind(pr.CAT, 3, 2), range(6), max_alice=1)[0]
    assert inst.bob == (0, 1)
    assert inst.ghz == (2, 3, 4)
    assert [p.qubits for p in inst.paths] == [(3, 0), (4, 1)]
    assert inst.touched == frozenset(range(5))


def test_do_nothing_camp_is_start():
    inst = pr.all_to_all_instances(ProtocolKind(pr.DO_NOTHING), range(3))[0]
    assert inst.camp == (inst.paths[0].start,)
    assert inst.swap_count() == 2


def test_lattice_instances_stay_in_rectangle(heron, heron_rects):
    r = heron_rects[4]
    for kind in pr.TABLE_ORDER:
        for st_ in (C2C, ML, AL):
            for p in enumerate_paths(r, st_)[::17]:
                inst = pr.lattice_instance(kind, r, p)
                assert inst.touched <= r.qubits
                assert inst.rectangle == r.index and inst.path == p.qubits
                assert all(path.swaps == p.swaps for path in inst.paths)
                for _, c in inst.circuits():
                    for g in c.gates:
                        if len(g.qubits) == 2:
                            assert heron.adjacent(*g.qubits)


def test_lattice_block_shift(heron_rects):
    r = heron_rects[0]
    path = QubitPath(r.cycle[3:6], C2C)
    inst = pr.lattice_instance(ProtocolKind(pr.GEN_TRANSMIT, 3), r, path)
    assert [p.qubits for p in inst.paths] == [r.cycle[3:6], r.cycle[2:5], r.cycle[1:4]]


def test_circuit_metadata(heron_rects):
    r = heron_rects[0]
    inst = pr.lattice_instance(ProtocolKind(pr.BELL), r, enumerate_paths(r, C2C)[0])
    s, c = inst.circuits()[1]
    assert c.meta["protocol"] == "bell" and c.meta["setting"] == "YY" == s.label
    assert c.meta["rectangle"] == r.index
    assert c.meta["paths"] == tuple(p.qubits for p in inst.paths)


def test_noiseless_fidelity_one_spot_check(heron, heron_rects, ibex):
    r = heron_rects[10]
    p = enumerate_paths(r, ML)[5]
    for kind in pr.TABLE_ORDER:
        assert oracle_fidelity(pr.lattice_instance(kind, r, p), heron) == pytest.approx(1.0, abs=1e-12)
        inst = pr.all_to_all_instances(kind, range(12), max_alice=1)[-1]
        assert oracle_fidelity(inst, ibex) == pytest.approx(1.0, abs=1e-12)
