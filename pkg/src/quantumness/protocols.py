"""Protocol builders, input/measurement settings and quantumness thresholds.

Every builder returns a :class:`~quantumness.circuit.Circuit`. Work-qubit
states are moved by SWAP chains; chains run in the given order and are
checked by tracking where each work state ends up, so overlapping routes
are accepted only when executed in an order that delivers every state.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from . import circuit as qc
from .circuit import Circuit, Gate
from .topology import QubitPath, Rectangle, extend_backwards

TRANSMIT, DO_NOTHING, BELL = "transmit", "do_nothing", "bell"
GEN_TRANSMIT, GEN_DO_NOTHING, CAT = "gen_transmit", "gen_do_nothing", "cat"
NAMES = (TRANSMIT, DO_NOTHING, BELL, GEN_TRANSMIT, GEN_DO_NOTHING, CAT)

DEFAULT_CAT_THRESHOLD = 0.5


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolKind:
    name: str
    m: int | None = None
    j: int | None = None

    def __post_init__(self) -> None:
        if self.name not in NAMES:
            raise ProtocolError(f"unknown protocol {self.name!r}")
        if self.name in (GEN_TRANSMIT, GEN_DO_NOTHING):
            if self.m not in (2, 3) or self.j is not None:
                raise ProtocolError(f"{self.name} needs M in 2..3")
        elif self.name == CAT:
            if self.m not in (3, 4) or self.j != 2:
                raise ProtocolError("cat state needs M in 3..4 and J = 2")
        elif self.m is not None or self.j is not None:
            raise ProtocolError(f"{self.name} takes no M/J parameters")

    @property
    def label(self) -> str:
        if self.name == CAT:
            return f"cat_m{self.m}_j{self.j}"
        if self.m is not None:
            return f"{self.name}_m{self.m}"
        return self.name

    @property
    def work_qubits(self) -> int:
        """Size of the prepared work state."""
        return {TRANSMIT: 1, DO_NOTHING: 1, BELL: 2}.get(self.name, self.m or 0)

    @property
    def moved_qubits(self) -> int:
        """How many work qubits are carried by SWAP chains."""
        return self.j if self.name == CAT else self.work_qubits

    @property
    def required_qubits(self) -> int:
        """Smallest all-to-all qubit set that can host one instance."""
        return self.work_qubits + self.moved_qubits

    @property
    def returns(self) -> bool:
        return self.name in (DO_NOTHING, GEN_DO_NOTHING)

    @property
    def params(self) -> dict[str, int | None]:
        return {"M": self.m, "J": self.j}

    def __str__(self) -> str:
        return self.label


def parse_kind(label: str) -> ProtocolKind:
    """Inverse of :attr:`ProtocolKind.label`."""
    parts = label.split("_")
    m = j = None
    while parts and parts[-1][:1] in ("m", "j") and parts[-1][1:].isdigit():
        tag = parts.pop()
        if tag[0] == "m":
            m = int(tag[1:])
        else:
            j = int(tag[1:])
    return ProtocolKind("_".join(parts), m, j)


# Table row order of the comparison report.
TABLE_ORDER = (
    ProtocolKind(TRANSMIT),
    ProtocolKind(GEN_TRANSMIT, 2),
    ProtocolKind(GEN_TRANSMIT, 3),
    ProtocolKind(DO_NOTHING),
    ProtocolKind(GEN_DO_NOTHING, 2),
    ProtocolKind(GEN_DO_NOTHING, 3),
    ProtocolKind(BELL),
    ProtocolKind(CAT, 3, 2),
    ProtocolKind(CAT, 4, 2),
)


def threshold_for(kind: ProtocolKind, cat_threshold: float = DEFAULT_CAT_THRESHOLD) -> float:
    """Classical-limit fidelity a protocol must reach to count as quantum."""
    if kind.name in (TRANSMIT, DO_NOTHING):
        return float(Fraction(2, 3))
    if kind.name == BELL:
        return 0.5
    if kind.name in (GEN_TRANSMIT, GEN_DO_NOTHING):
        return float(Fraction(2, 3) ** kind.m)
    return cat_threshold


# ---------------------------------------------------------------------------
# Settings

AXIAL = (("Z", 1), ("Z", -1), ("X", 1), ("X", -1), ("Y", 1), ("Y", -1))


def axial_label(axis: str, sign: int) -> str:
    return f"{axis}{'+' if sign > 0 else '-'}"


@dataclass(frozen=True)
class Setting:
    """One circuit variant of a protocol instance.

    Transfer families carry one axial state per work qubit; Bell carries a
    correlator basis (XX, YY, ZZ); the cat state is either the population
    setting or parity setting ``k``.
    """

    label: str
    axial: tuple[tuple[str, int], ...] = ()
    basis: str | None = None
    parity_k: int | None = None

    @property
    def expected_bits(self) -> str:
        return "".join("0" if sign > 0 else "1" for _, sign in self.axial)


def transfer_settings(m: int = 1) -> list[Setting]:
    # Latin design: across the six settings every work qubit sees all six axial states.
    out = []
    for s in range(len(AXIAL)):
        states = tuple(AXIAL[(s + i) % len(AXIAL)] for i in range(m))
        out.append(Setting(",".join(axial_label(*a) for a in states), axial=states))
    return out


BELL_SETTINGS = tuple(Setting(b, basis=b) for b in ("XX", "YY", "ZZ"))


def cat_settings(m: int) -> list[Setting]:
    return [Setting("pop")] + [Setting(f"par{k}", parity_k=k) for k in range(m)]


def settings_for(kind: ProtocolKind) -> list[Setting]:
    if kind.name in (TRANSMIT, DO_NOTHING):
        return transfer_settings(1)
    if kind.name in (GEN_TRANSMIT, GEN_DO_NOTHING):
        return transfer_settings(kind.m)
    if kind.name == BELL:
        return list(BELL_SETTINGS)
    return cat_settings(kind.m)


# ---------------------------------------------------------------------------
# Builders


def _chain(path: Sequence[int]) -> list[Gate]:
    return [qc.swap(a, b) for a, b in zip(path, path[1:])]


def _transfer(paths: Sequence[QubitPath]) -> list[Gate]:
    """SWAP chains for ``paths`` in order, verified to deliver every state."""
    if len({p.start for p in paths}) != len(paths) or len({p.end for p in paths}) != len(paths):
        raise ProtocolError("path collision: work paths share a start or an end qubit")
    where = {p.start: i for i, p in enumerate(paths)}
    gates: list[Gate] = []
    for p in paths:
        for g in _chain(p.qubits):
            a, b = g.qubits
            wa, wb = where.pop(a, None), where.pop(b, None)
            if wa is not None:
                where[b] = wa
            if wb is not None:
                where[a] = wb
            gates.append(g)
    for i, p in enumerate(paths):
        if where.get(p.end) != i:
            raise ProtocolError(f"path collision: work state {i} does not reach qubit {p.end}")
    return gates


def _undo(gates: Sequence[Gate]) -> list[Gate]:
    return [qc.swap(g.qubits[1], g.qubits[0]) for g in reversed(gates)]


def _as_path(p: QubitPath | Sequence[int]) -> QubitPath:
    return p if isinstance(p, QubitPath) else QubitPath(tuple(p))


def _readout(targets: Sequence[int], axial: Sequence[tuple[str, int]]) -> list[Gate]:
    return [qc.basis_rotation(q, axis) for q, (axis, _) in zip(targets, axial) if axis != "Z"]


def build_transmit(path: QubitPath | Sequence[int], setting: Setting) -> Circuit:
    path = _as_path(path)
    (axis, sign), = setting.axial
    gates = [qc.prepare(path.start, axis, sign)] + _transfer([path])
    gates += _readout([path.end], setting.axial)
    return qc.build(gates, [path.end])


def build_do_nothing(path: QubitPath | Sequence[int], setting: Setting) -> Circuit:
    path = _as_path(path)
    (axis, sign), = setting.axial
    forward = _transfer([path])
    gates = [qc.prepare(path.start, axis, sign)] + forward + _undo(forward)
    gates += _readout([path.start], setting.axial)
    return qc.build(gates, [path.start])


def _gen(paths: Sequence[QubitPath | Sequence[int]], setting: Setting, back: bool) -> Circuit:
    paths = [_as_path(p) for p in paths]
    if not 2 <= len(paths) <= 3:
        raise ProtocolError(f"generalized protocols take M in 2..3 paths, got {len(paths)}")
    if len(setting.axial) != len(paths):
        raise ProtocolError("setting does not match the number of work qubits")
    gates = [qc.prepare(p.start, a, s) for p, (a, s) in zip(paths, setting.axial)]
    forward = _transfer(paths)
    gates += forward
    targets = [p.end for p in paths]
    if back:
        gates += _undo(forward)
        targets = [p.start for p in paths]
    gates += _readout(targets, setting.axial)
    return qc.build(gates, targets)


def build_gen_transmit(paths: Sequence[QubitPath | Sequence[int]], setting: Setting) -> Circuit:
    return _gen(paths, setting, back=False)


def build_gen_do_nothing(paths: Sequence[QubitPath | Sequence[int]], setting: Setting) -> Circuit:
    return _gen(paths, setting, back=True)


def _correlator_rotation(qubits: Sequence[int], basis: str) -> list[Gate]:
    return [qc.basis_rotation(q, axis) for q, axis in zip(qubits, basis) if axis != "Z"]


def build_bell_transfer(
    alice_pair: Sequence[int],
    bob_pair: Sequence[int],
    paths: Sequence[QubitPath | Sequence[int]],
    setting: Setting,
) -> Circuit:
    """Prepare Phi+ on Alice's pair, carry both halves to Bob, measure Bob's pair."""
    paths = [_as_path(p) for p in paths]
    if len(paths) != 2 or setting.basis is None:
        raise ProtocolError("Bell transfer needs two paths and an XX/YY/ZZ setting")
    if set(alice_pair) == set(bob_pair):
        raise ProtocolError("identical endpoints: Alice's and Bob's pairs coincide")
    if {p.start for p in paths} != set(alice_pair) or {p.end for p in paths} != set(bob_pair):
        raise ProtocolError("paths do not connect Alice's pair to Bob's pair")
    a0, a1 = alice_pair
    gates = [qc.hadamard(a0), qc.cx(a0, a1)] + _transfer(paths)
    by_start = {p.start: p.end for p in paths}
    bob = [by_start[a0], by_start[a1]]
    gates += _correlator_rotation(bob, setting.basis)
    return qc.build(gates, bob)


def build_cat_state(
    qubits: Sequence[int],
    transfer_set: Sequence[int],
    paths: Sequence[QubitPath | Sequence[int]],
    setting: Setting,
) -> Circuit:
    """GHZ on ``qubits`` (CX chain), carry ``transfer_set`` to Bob, then read out."""
    paths = [_as_path(p) for p in paths]
    m = len(qubits)
    if len(transfer_set) != 2:
        raise ProtocolError(f"unsupported J = {len(transfer_set)} (only J = 2)")
    if not set(transfer_set) <= set(qubits) or len(set(qubits)) != m:
        raise ProtocolError("transfer set must be a subset of the GHZ qubits")
    if {p.start for p in paths} != set(transfer_set):
        raise ProtocolError("paths must start at the transferred qubits")
    gates = [qc.hadamard(qubits[0])] + [qc.cx(a, b) for a, b in zip(qubits, qubits[1:])]
    gates += _transfer(paths)
    moved = {p.start: p.end for p in paths}
    final = [moved.get(q, q) for q in qubits]
    if setting.parity_k is not None:
        phi = setting.parity_k * math.pi / m
        gates += [qc.parity_rotation(q, phi) for q in final]
    return qc.build(gates, final)


# ---------------------------------------------------------------------------
# Protocol instances: one routing of one protocol, expanded to its settings.


@dataclass(frozen=True)
class ProtocolInstance:
    kind: ProtocolKind
    stage: str
    paths: tuple[QubitPath, ...]
    rectangle: int | None = None
    path: tuple[int, ...] | None = None  # stage path on lattice devices
    ghz: tuple[int, ...] = ()  # GHZ qubits for the cat state

    @property
    def alice(self) -> tuple[int, ...]:
        return self.ghz if self.kind.name == CAT else tuple(p.start for p in self.paths)

    @property
    def bob(self) -> tuple[int, ...]:
        return tuple(p.end for p in self.paths)

    @property
    def camp(self) -> tuple[int, ...]:
        """Receiving (measured) set: the aggregation key for camp grouping."""
        if self.kind.returns:
            return tuple(sorted(self.alice))
        return tuple(sorted(self.bob))

    @property
    def touched(self) -> frozenset[int]:
        return frozenset(q for p in self.paths for q in p.qubits) | frozenset(self.ghz)

    @property
    def key(self) -> tuple:
        return (self.kind.label, self.stage, self.rectangle, tuple(p.qubits for p in self.paths))

    def swap_count(self) -> int:
        n = sum(p.swaps for p in self.paths)
        return 2 * n if self.kind.returns else n

    def circuit(self, setting: Setting) -> Circuit:
        k = self.kind.name
        if k == TRANSMIT:
            c = build_transmit(self.paths[0], setting)
        elif k == DO_NOTHING:
            c = build_do_nothing(self.paths[0], setting)
        elif k == GEN_TRANSMIT:
            c = build_gen_transmit(self.paths, setting)
        elif k == GEN_DO_NOTHING:
            c = build_gen_do_nothing(self.paths, setting)
        elif k == BELL:
            c = build_bell_transfer(self.alice, self.bob, self.paths, setting)
        else:
            c = build_cat_state(self.ghz, [p.start for p in self.paths], self.paths, setting)
        return c.with_metadata(
            protocol=self.kind.label,
            stage=self.stage,
            setting=setting.label,
            rectangle=self.rectangle,
            paths=tuple(p.qubits for p in self.paths),
        )

    def circuits(self) -> list[tuple[Setting, Circuit]]:
        return [(s, self.circuit(s)) for s in settings_for(self.kind)]


def lattice_instance(kind: ProtocolKind, rect: Rectangle, stage_path: QubitPath) -> ProtocolInstance:
    """Route ``kind`` along ``stage_path`` inside ``rect``.

    Multi-qubit work states occupy a contiguous block of the rectangle cycle
    that ends at the path's start; the block is shifted along the path by its
    swap distance, leading qubit first.
    """
    d = stage_path.swaps
    w = kind.work_qubits
    ext = extend_backwards(rect, stage_path, w - 1)
    moved = kind.moved_qubits
    paths = tuple(
        QubitPath(ext[w - 1 - i: w - 1 - i + d + 1], stage_path.stage) for i in range(moved)
    )
    ghz = tuple(ext[:w]) if kind.name == CAT else ()
    return ProtocolInstance(kind, stage_path.stage, paths, rect.index, stage_path.qubits, ghz)


def all_to_all_instances(
    kind: ProtocolKind,
    qubits: Iterable[int],
    max_alice: int | None = None,
    stage: str = "AL",
) -> list[ProtocolInstance]:
    """Every routing of ``kind`` over ``qubits`` on an all-to-all device.

    Single-qubit protocols use every ordered pair. Multi-qubit protocols use
    every Bob camp (unordered subset) against disjoint Alice camps in
    lexicographic order, at most ``max_alice`` per Bob camp.
    """
    qs = sorted(set(qubits))
    out: list[ProtocolInstance] = []
    if kind.work_qubits == 1:
        for a, b in itertools.permutations(qs, 2):
            out.append(ProtocolInstance(kind, stage, (QubitPath((a, b), stage),)))
        return out
    moved = kind.moved_qubits
    for bob in itertools.combinations(qs, moved):
        rest = [q for q in qs if q not in bob]
        alices = itertools.combinations(rest, kind.work_qubits)
        if max_alice is not None:
            alices = itertools.islice(alices, max_alice)
        for alice in alices:
            senders = alice[len(alice) - moved:]
            paths = tuple(QubitPath((a, b), stage) for a, b in zip(senders, bob))
            ghz = alice if kind.name == CAT else ()
            out.append(ProtocolInstance(kind, stage, paths, None, None, ghz))
    return out
