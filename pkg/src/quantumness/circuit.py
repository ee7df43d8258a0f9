"""Minimal gate-level circuit IR shared by protocol builders and backends.

Circuits are immutable values. Appending returns a new circuit, and equality
is structural. The gate alphabet is deliberately small: axial state
preparation, H, S, S-dagger, CX, SWAP and measurement-basis rotations
(including the parity-phase rotation used by the GHZ estimator).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping

import numpy as np

AXES = ("X", "Y", "Z")

# Gate kinds. "rot" carries either an axis or a parity phase.
PREP, H, S, SDG, CX, SWAP, ROT = "prep", "h", "s", "sdg", "cx", "swap", "rot"
ONE_QUBIT = frozenset({PREP, H, S, SDG, ROT})
TWO_QUBIT = frozenset({CX, SWAP})
KINDS = ONE_QUBIT | TWO_QUBIT


class CircuitError(ValueError):
    """Raised for malformed gates or circuits."""


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    axis: str | None = None
    sign: int | None = None
    phase: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind in TWO_QUBIT else 1
        if len(self.qubits) != arity:
            raise CircuitError(f"{self.kind} takes {arity} operand(s), got {len(self.qubits)}")
        if any((not isinstance(q, (int, np.integer))) or q < 0 for q in self.qubits):
            raise CircuitError(f"operands must be non-negative integers: {self.qubits}")
        if arity == 2 and self.qubits[0] == self.qubits[1]:
            raise CircuitError(f"duplicate operands on {self.kind}: {self.qubits}")
        if self.kind == PREP:
            if self.axis not in AXES or self.sign not in (1, -1):
                raise CircuitError("prep needs axis in X/Y/Z and sign +1/-1")
        if self.kind == ROT:
            if (self.axis is None) == (self.phase is None):
                raise CircuitError("rot needs exactly one of axis or phase")
            if self.axis is not None and self.axis not in AXES:
                raise CircuitError(f"bad rotation axis {self.axis!r}")
            if self.phase is not None and not 0.0 <= self.phase < 2 * math.pi:
                raise CircuitError(f"parity phase must lie in [0, 2pi): {self.phase}")

    def relabel(self, mapping: Mapping[int, int]) -> "Gate":
        return replace(self, qubits=tuple(mapping[q] for q in self.qubits))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "qubits": list(self.qubits)}
        if self.axis is not None:
            out["axis"] = self.axis
        if self.sign is not None:
            out["sign"] = self.sign
        if self.phase is not None:
            out["phase"] = self.phase
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Gate":
        return cls(
            kind=data["kind"],
            qubits=tuple(int(q) for q in data["qubits"]),
            axis=data.get("axis"),
            sign=data.get("sign"),
            phase=data.get("phase"),
        )

    def __str__(self) -> str:
        extra = ""
        if self.kind == PREP:
            extra = f"[{self.axis}{'+' if self.sign == 1 else '-'}]"
        elif self.kind == ROT:
            extra = f"[{self.axis}]" if self.axis else f"[phi={self.phase:.4f}]"
        return f"{self.kind.upper()}{extra}({', '.join(map(str, self.qubits))})"


# Convenience constructors
def prepare(q: int, axis: str, sign: int) -> Gate:
    return Gate(PREP, (q,), axis=axis, sign=sign)


def hadamard(q: int) -> Gate:
    return Gate(H, (q,))


def s_gate(q: int) -> Gate:
    return Gate(S, (q,))


def s_inverse(q: int) -> Gate:
    return Gate(SDG, (q,))


def cx(control: int, target: int) -> Gate:
    return Gate(CX, (control, target))


def swap(a: int, b: int) -> Gate:
    return Gate(SWAP, (a, b))


def basis_rotation(q: int, axis: str) -> Gate:
    return Gate(ROT, (q,), axis=axis)


def parity_rotation(q: int, phase: float) -> Gate:
    return Gate(ROT, (q,), phase=phase % (2 * math.pi))


@dataclass(frozen=True)
class Circuit:
    gates: tuple[Gate, ...] = ()
    measured: tuple[int, ...] = ()
    metadata: tuple[tuple[str, Any], ...] = ()
    num_qubits: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if len(set(self.measured)) != len(self.measured):
            raise CircuitError(f"measured qubits repeat: {self.measured}")
        if self.num_qubits is not None:
            for q in self.qubits:
                if q >= self.num_qubits:
                    raise CircuitError(f"qubit {q} out of range for a {self.num_qubits}-qubit device")

    @property
    def meta(self) -> dict[str, Any]:
        return dict(self.metadata)

    @property
    def qubits(self) -> tuple[int, ...]:
        """Sorted ids of every qubit touched by a gate or measured."""
        seen = {q for g in self.gates for q in g.qubits}
        seen.update(self.measured)
        return tuple(sorted(seen))

    def __len__(self) -> int:
        return len(self.gates)

    def depth(self) -> int:
        level: dict[int, int] = {}
        depth = 0
        for g in self.gates:
            d = max(level.get(q, 0) for q in g.qubits) + 1
            for q in g.qubits:
                level[q] = d
            depth = max(depth, d)
        return depth

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)

    def with_metadata(self, **items: Any) -> "Circuit":
        meta = self.meta
        meta.update(items)
        return replace(self, metadata=tuple(sorted(meta.items())))

    def measure(self, *qubits: int) -> "Circuit":
        return replace(self, measured=self.measured + tuple(qubits))

    def to_dict(self) -> dict[str, Any]:
        return {
            "gates": [g.to_dict() for g in self.gates],
            "measured": list(self.measured),
            "metadata": self.meta,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], num_qubits: int | None = None) -> "Circuit":
        meta = data.get("metadata", {})
        return cls(
            gates=tuple(Gate.from_dict(g) for g in data["gates"]),
            measured=tuple(int(q) for q in data["measured"]),
            metadata=tuple(sorted(meta.items())),
            num_qubits=num_qubits,
        )


def append_gate(circuit: Circuit, gate: Gate) -> Circuit:
    """Return a new circuit with ``gate`` appended; ``circuit`` is unchanged."""
    if circuit.num_qubits is not None:
        bad = [q for q in gate.qubits if q >= circuit.num_qubits]
        if bad:
            raise CircuitError(f"operand {bad[0]} out of range for a {circuit.num_qubits}-qubit device")
    return replace(circuit, gates=circuit.gates + (gate,))


def build(gates: Iterable[Gate], measured: Iterable[int] = (), num_qubits: int | None = None, **meta: Any) -> Circuit:
    c = Circuit(tuple(gates), tuple(measured), tuple(sorted(meta.items())), num_qubits)
    return c


def _relabel_trusted(gate: Gate, mapping: Mapping[int, int]) -> Gate:
    # mapping is injective onto 0..k-1, so the operand checks cannot fail
    out = copy.copy(gate)
    object.__setattr__(out, "qubits", tuple(mapping[q] for q in gate.qubits))
    return out


def remap_to_compact(circuit: Circuit) -> tuple[Circuit, dict[int, int]]:
    """Relabel touched qubits onto 0..k-1, preserving their relative order.

    Returns the compact circuit and the physical -> dense mapping.
    """
    touched = circuit.qubits
    if not touched:
        raise CircuitError("circuit touches no qubits")
    mapping = {q: i for i, q in enumerate(touched)}
    compact = Circuit(
        gates=tuple(_relabel_trusted(g, mapping) for g in circuit.gates),
        measured=tuple(mapping[q] for q in circuit.measured),
        metadata=circuit.metadata,
        num_qubits=len(touched),
    )
    return compact, mapping


def swap_decompose(circuit: Circuit) -> Circuit:
    """Replace every SWAP(a, b) with CX(a, b), CX(b, a), CX(a, b)."""
    gates: list[Gate] = []
    for g in circuit.gates:
        if g.kind == SWAP:
            a, b = g.qubits
            gates += [cx(a, b), cx(b, a), cx(a, b)]
        else:
            gates.append(g)
    return replace(circuit, gates=tuple(gates))


# Gate semantics. Rotations map the named axis' +/- eigenstates onto |0>/|1>.
_SQ2 = 1 / math.sqrt(2)
_HM = np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2
_SM = np.array([[1, 0], [0, 1j]], dtype=complex)
_SDGM = _SM.conj().T
_XM = np.array([[0, 1], [1, 0]], dtype=complex)
_IM = np.eye(2, dtype=complex)

_PREP = {
    ("Z", 1): _IM,
    ("Z", -1): _XM,
    ("X", 1): _HM,
    ("X", -1): _HM @ _XM,
    ("Y", 1): _SM @ _HM,
    ("Y", -1): _SM @ _HM @ _XM,
}
_ROT = {"Z": _IM, "X": _HM, "Y": _HM @ _SDGM}

_CXM = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_SWAPM = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def gate_unitary(gate: Gate) -> np.ndarray:
    """Unitary of ``gate``; 2-qubit matrices use (first operand, second operand) ordering."""
    k = gate.kind
    if k == PREP:
        return _PREP[(gate.axis, gate.sign)]
    if k == H:
        return _HM
    if k == S:
        return _SM
    if k == SDG:
        return _SDGM
    if k == ROT:
        if gate.axis is not None:
            return _ROT[gate.axis]
        # phase-shift by -phi, then read out X
        return _HM @ np.diag([1.0, np.exp(-1j * gate.phase)])
    if k == CX:
        return _CXM
    return _SWAPM
