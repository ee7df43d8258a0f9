import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantumness import circuit as qc
from quantumness.circuit import Circuit, CircuitError, Gate


def full_unitary(circuit: Circuit, n: int) -> np.ndarray:
    """Dense unitary of a circuit on n qubits, qubit 0 most significant."""
    u = np.eye(2**n, dtype=complex)
    for g in circuit.gates:
        gu = qc.gate_unitary(g).reshape((2,) * (2 * len(g.qubits)))
        t = u.reshape((2,) * n + (2**n,))
        k = len(g.qubits)
        t = np.tensordot(gu, t, axes=(list(range(k, 2 * k)), list(g.qubits)))
        t = np.moveaxis(t, list(range(k)), list(g.qubits))
        u = t.reshape(2**n, 2**n)
    return u


def test_gate_validation():
    with pytest.raises(CircuitError, match="unknown gate kind"):
        Gate("t", (0,))
    with pytest.raises(CircuitError, match="operand"):
        Gate(qc.CX, (0,))
    with pytest.raises(CircuitError, match="duplicate"):
        qc.cx(1, 1)
    with pytest.raises(CircuitError, match="non-negative"):
        qc.hadamard(-1)
    with pytest.raises(CircuitError, match="prep"):
        qc.prepare(0, "W", 1)
    with pytest.raises(CircuitError, match="exactly one"):
        Gate(qc.ROT, (0,))


def test_append_returns_new_circuit():
    c0 = qc.build([qc.prepare(0, "Z", 1)], [0])
    c1 = qc.append_gate(c0, qc.hadamard(0))
    assert len(c0) == 1 and len(c1) == 2
    assert c1.gates[:1] == c0.gates
    with pytest.raises(dataclasses.FrozenInstanceError):
        c0.gates = ()


def test_append_out_of_range():
    c = Circuit(num_qubits=2)
    with pytest.raises(CircuitError, match="out of range"):
        qc.append_gate(c, qc.cx(0, 2))


def test_measured_repeat_rejected():
    with pytest.raises(CircuitError, match="repeat"):
        Circuit(measured=(1, 1))


def test_structural_equality_and_metadata():
    a = qc.build([qc.hadamard(3), qc.cx(3, 5)], [5], protocol="x")
    b = qc.build([qc.hadamard(3), qc.cx(3, 5)], [5], protocol="x")
    assert a == b and hash(a) == hash(b)
    assert a.meta == {"protocol": "x"}
    assert a.with_metadata(stage="c2c").meta == {"protocol": "x", "stage": "c2c"}


def test_remap_to_compact_preserves_order():
    c = qc.build([qc.prepare(40, "X", -1), qc.swap(40, 17), qc.swap(17, 93)], [93])
    compact, mapping = qc.remap_to_compact(c)
    assert mapping == {17: 0, 40: 1, 93: 2}
    assert compact.num_qubits == 3
    assert compact.gates[1] == qc.swap(1, 0)
    assert compact.measured == (2,)


def test_remap_empty_rejected():
    with pytest.raises(CircuitError):
        qc.remap_to_compact(Circuit())


def test_dict_round_trip():
    c = qc.build([qc.prepare(0, "Y", -1), qc.parity_rotation(1, math.pi / 3), qc.basis_rotation(0, "X")], [0, 1], k=1)
    assert Circuit.from_dict(c.to_dict()) == c


def test_depth_and_count():
    c = qc.build([qc.hadamard(0), qc.hadamard(1), qc.cx(0, 1), qc.swap(1, 2)], [2])
    assert c.depth() == 3
    assert c.count(qc.H) == 2


def test_rotations_map_eigenstates_to_computational_basis():
    for axis in qc.AXES:
        for sign in (1, -1):
            state = qc.gate_unitary(qc.prepare(0, axis, sign))[:, 0]
            out = qc.gate_unitary(qc.basis_rotation(0, axis)) @ state
            expected = 0 if sign == 1 else 1
            assert abs(out[expected]) == pytest.approx(1.0, abs=1e-12)


def test_gate_unitaries_are_unitary():
    for g in (qc.hadamard(0), qc.s_gate(0), qc.s_inverse(0), qc.cx(0, 1), qc.swap(0, 1),
              qc.basis_rotation(0, "Y"), qc.parity_rotation(0, 1.0)):
        u = qc.gate_unitary(g)
        assert np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-12)


GATES = st.one_of(
    st.builds(qc.hadamard, st.integers(0, 2)),
    st.builds(qc.s_gate, st.integers(0, 2)),
    st.builds(lambda q, a: qc.basis_rotation(q, a), st.integers(0, 2), st.sampled_from(qc.AXES)),
    st.builds(lambda p: qc.cx(*p), st.permutations([0, 1, 2]).map(lambda x: x[:2])),
    st.builds(lambda p: qc.swap(*p), st.permutations([0, 1, 2]).map(lambda x: x[:2])),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(GATES, min_size=1, max_size=12))
def test_swap_decompose_is_unitarily_equivalent(gates):
    c = qc.build(gates, [0, 1, 2])
    d = qc.swap_decompose(c)
    assert d.count(qc.SWAP) == 0
    assert np.allclose(full_unitary(c, 3), full_unitary(d, 3), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.lists(GATES, min_size=1, max_size=8), st.sampled_from([(0, 1, 2), (5, 9, 30), (70, 3, 11)]))
def test_compact_relabeling_keeps_structure(gates, labels):
    mapping = dict(enumerate(labels))
    c = qc.build([g.relabel(mapping) for g in gates], [labels[0]])
    compact, m = qc.remap_to_compact(c)
    back = {v: k for k, v in m.items()}
    assert tuple(g.relabel(back) for g in compact.gates) == c.gates
