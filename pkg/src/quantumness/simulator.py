"""Circuit execution: batched noisy trajectories, an exact density oracle, and replay.

The trajectory simulator and the oracle share only the gate unitaries and the
noise-model lookup. The simulator unravels depolarizing noise into random
Pauli insertions; the oracle applies the channel exactly via a partial trace.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import circuit as qc
from .circuit import Circuit, Gate, gate_unitary
from .topology import DeviceTopology

ORACLE_MAX_QUBITS = 10
NORM_TOL = 1e-9


class SimulationError(RuntimeError):
    pass


class NoRecordedData(KeyError):
    def __str__(self) -> str:
        return self.args[0] if self.args else "no recorded data"


def _edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _check_prob(name: str, p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} probability {p} outside [0, 1]")
    return p


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing gate noise plus symmetric readout flips.

    Per-qubit and per-edge overrides fall back to the scalar defaults.
    """

    p1: float = 0.0
    p2: float = 0.0
    readout: float = 0.0
    p1_qubits: Mapping[int, float] = field(default_factory=dict)
    p2_edges: Mapping[tuple[int, int], float] = field(default_factory=dict)
    readout_qubits: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("p1", "p2", "readout"):
            _check_prob(name, getattr(self, name))
        object.__setattr__(self, "p1_qubits", {int(q): _check_prob("p1", p) for q, p in self.p1_qubits.items()})
        object.__setattr__(
            self, "p2_edges", {_edge(int(a), int(b)): _check_prob("p2", p) for (a, b), p in self.p2_edges.items()}
        )
        object.__setattr__(
            self, "readout_qubits", {int(q): _check_prob("readout", p) for q, p in self.readout_qubits.items()}
        )

    def one(self, q: int) -> float:
        return self.p1_qubits.get(q, self.p1)

    def two(self, a: int, b: int) -> float:
        return self.p2_edges.get(_edge(a, b), self.p2)

    def flip(self, q: int) -> float:
        return self.readout_qubits.get(q, self.readout)

    @property
    def is_ideal(self) -> bool:
        return not any(
            [self.p1, self.p2, self.readout]
            + list(self.p1_qubits.values())
            + list(self.p2_edges.values())
            + list(self.readout_qubits.values())
        )

    def check_device(self, device: DeviceTopology) -> None:
        refs = set(self.p1_qubits) | set(self.readout_qubits) | {q for e in self.p2_edges for q in e}
        bad = [q for q in refs if q >= device.num_qubits]
        if bad:
            raise ValueError(f"noise references qubit {min(bad)} outside the device")
        if not device.all_to_all:
            for a, b in self.p2_edges:
                if not device.adjacent(a, b):
                    raise ValueError(f"noise references edge ({a}, {b}) that is not a device edge")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"p1": self.p1, "p2": self.p2, "readout": self.readout}
        if self.p1_qubits:
            out["p1_qubits"] = {str(q): p for q, p in sorted(self.p1_qubits.items())}
        if self.p2_edges:
            out["p2_edges"] = [[a, b, p] for (a, b), p in sorted(self.p2_edges.items())]
        if self.readout_qubits:
            out["readout_qubits"] = {str(q): p for q, p in sorted(self.readout_qubits.items())}
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | None) -> "NoiseModel":
        data = data or {}
        known = {"p1", "p2", "readout", "p1_qubits", "p2_edges", "readout_qubits", "synthetic", "note"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown noise fields: {sorted(unknown)}")
        return cls(
            p1=data.get("p1", 0.0),
            p2=data.get("p2", 0.0),
            readout=data.get("readout", 0.0),
            p1_qubits={int(q): p for q, p in data.get("p1_qubits", {}).items()},
            p2_edges={(int(a), int(b)): p for a, b, p in data.get("p2_edges", [])},
            readout_qubits={int(q): p for q, p in data.get("readout_qubits", {}).items()},
        )


IDEAL = NoiseModel()


@dataclass(frozen=True)
class CountsTable:
    counts: Mapping[str, int]
    shots: int

    def __post_init__(self) -> None:
        if self.shots < 1:
            raise ValueError("shots must be positive")
        if sum(self.counts.values()) != self.shots:
            raise ValueError(f"counts sum to {sum(self.counts.values())}, expected {self.shots}")
        if any(n < 0 for n in self.counts.values()):
            raise ValueError("negative count")
        if len({len(k) for k in self.counts}) > 1:
            raise ValueError("bitstrings of unequal length")

    @property
    def width(self) -> int:
        return len(next(iter(self.counts))) if self.counts else 0

    def probability(self, bits: str) -> float:
        return self.counts.get(bits, 0) / self.shots

    def to_dict(self) -> dict[str, int]:
        return {k: int(v) for k, v in sorted(self.counts.items())}


@dataclass(frozen=True)
class ExecutionRequest:
    circuits: Sequence[Circuit]
    device: DeviceTopology
    shots: int = 1000
    seed: int = 0
    noise: NoiseModel | None = None
    # Optional per-circuit stream ids; defaults to the position in the batch.
    streams: Sequence[int] | None = None

    def __post_init__(self) -> None:
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.streams is not None and len(self.streams) != len(self.circuits):
            raise ValueError("one stream id per circuit required")


def circuit_rng(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator for one circuit; shot s reads row s of each draw block."""
    return np.random.Generator(np.random.Philox(key=[seed % 2**64, stream % 2**64]))


# ---------------------------------------------------------------------------
# Device binding checks shared by both routes.


def _bind(circuit: Circuit, device: DeviceTopology) -> None:
    for g in circuit.gates:
        for q in g.qubits:
            if q >= device.num_qubits:
                raise SimulationError(f"unbound qubit {q} on device {device.name}")
        if len(g.qubits) == 2 and not device.all_to_all and not device.adjacent(*g.qubits):
            raise SimulationError(f"{g} acts on non-adjacent qubits of {device.name}")
    for q in circuit.measured:
        if q >= device.num_qubits:
            raise SimulationError(f"unbound qubit {q} on device {device.name}")


# ---------------------------------------------------------------------------
# Trajectory simulator

_PAULI = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


def _pauli_string(index: int, k: int) -> np.ndarray:
    """Pauli with base-4 digits ``index`` on ``k`` qubits (first qubit most significant)."""
    m = np.ones((1, 1), dtype=complex)
    for pos in range(k - 1, -1, -1):
        m = np.kron(m, _PAULI[(index >> (2 * pos)) & 3])
    return m


def _apply_batch(states: np.ndarray, u: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Apply ``u`` to ``qubits`` of every state in a (P, 2, ..., 2) batch."""
    k = len(qubits)
    axes = [q + 1 for q in qubits]
    moved = np.moveaxis(states, axes, list(range(n + 1 - k, n + 1)))
    shape = moved.shape
    out = (moved.reshape(-1, 2**k) @ u.T).reshape(shape)
    return np.moveaxis(out, list(range(n + 1 - k, n + 1)), axes)


@dataclass(frozen=True)
class _Schedule:
    n: int
    ops: tuple  # ("g", gate signature, wires) or ("e", wires, event index)
    probs: tuple[float, ...]  # one per noise event
    sizes: tuple[int, ...]  # support size per noise event
    measured: tuple[int, ...]
    flips: tuple[float, ...]


_CX_SIG = (qc.CX, None, None, None)


@functools.lru_cache(maxsize=64)
def _signature_unitary(sig: tuple) -> np.ndarray:
    kind, axis, sign, phase = sig
    wires = (0, 1) if kind in qc.TWO_QUBIT else (0,)
    return gate_unitary(Gate(kind, wires, axis, sign, phase))


def _lower(circuit: Circuit, device: DeviceTopology, noise: NoiseModel) -> _Schedule:
    """Gate list on wires numbered by first appearance, with a noise event after each noisy gate.

    Numbering by appearance makes circuits that differ only by a relabeling of
    physical qubits lower to the same schedule, so cached ideal distributions
    are shared between them.
    """
    _bind(circuit, device)
    wire: dict[int, int] = {}
    ops: list = []
    probs: list[float] = []
    sizes: list[int] = []
    noisy = not noise.is_ideal
    split_swaps = not device.all_to_all
    for g in circuit.gates:
        wires = tuple([wire.setdefault(q, len(wire)) for q in g.qubits])
        if g.kind == qc.SWAP and split_swaps:
            a, b = wires
            parts = [(_CX_SIG, wires), (_CX_SIG, (b, a)), (_CX_SIG, wires)]
        else:
            parts = [((g.kind, g.axis, g.sign, g.phase), wires)]
        p = 0.0
        if noisy:
            p = noise.one(g.qubits[0]) if len(g.qubits) == 1 else noise.two(*g.qubits)
        for sig, w in parts:
            ops.append(("g", sig, w))
            if p > 0:
                ops.append(("e", w, len(probs)))
                probs.append(p)
                sizes.append(len(w))
    measured = tuple(wire.setdefault(q, len(wire)) for q in circuit.measured)
    flips = tuple(noise.flip(q) for q in circuit.measured)
    return _Schedule(len(wire), tuple(ops), tuple(probs), tuple(sizes), measured, flips)


def _pattern_probabilities(sched: _Schedule, patterns: np.ndarray) -> np.ndarray:
    """Outcome distributions over the measured qubits, one row per error pattern."""
    n = sched.n
    count = patterns.shape[0]
    states = np.zeros((count,) + (2,) * n, dtype=complex)
    states[(slice(None),) + (0,) * n] = 1.0
    for op in sched.ops:
        if op[0] == "g":
            states = _apply_batch(states, _signature_unitary(op[1]), op[2], n)
        else:
            _, qubits, e = op
            col = patterns[:, e]
            for idx in np.unique(col):
                if idx == 0:
                    continue
                rows = np.nonzero(col == idx)[0]
                states[rows] = _apply_batch(states[rows], _pauli_string(int(idx), len(qubits)), qubits, n)
    probs = np.abs(states) ** 2
    norms = probs.reshape(count, -1).sum(axis=1)
    if np.max(np.abs(norms - 1.0)) > NORM_TOL:
        raise SimulationError(f"state norm drifted to {norms.min():.12f}")
    keep = [q + 1 for q in sched.measured]
    drop = tuple(ax for ax in range(1, n + 1) if ax not in keep)
    marg = probs.sum(axis=drop) if drop else probs
    # reorder axes to measured order
    remaining = [ax for ax in range(1, n + 1) if ax in keep]
    order = [0] + [1 + remaining.index(q + 1) for q in sched.measured]
    marg = np.transpose(marg, order)
    return marg.reshape(count, -1)


@functools.lru_cache(maxsize=16384)
def _ideal_distribution(sched: _Schedule) -> np.ndarray:
    return _pattern_probabilities(sched, np.zeros((1, len(sched.probs)), dtype=np.int64))[0]


def _run_one(sched: _Schedule, shots: int, rng: np.random.Generator) -> CountsTable:
    m = len(sched.measured)
    events = len(sched.probs)
    draws = rng.random((shots, events + m + 1))
    if events:
        p = np.asarray(sched.probs)
        d2m1 = 4.0 ** np.asarray(sched.sizes) - 1.0
        # standard depolarizing p inserts a non-identity Pauli with probability p (d^2-1)/d^2
        p_err = p * d2m1 / (d2m1 + 1.0)
        u = draws[:, :events]
        hit = u < p_err
        which = np.minimum((u / np.where(p_err > 0, p_err, 1.0) * d2m1).astype(np.int64), d2m1.astype(np.int64) - 1) + 1
        patterns = np.where(hit, which, 0)
    else:
        patterns = np.zeros((shots, 0), dtype=np.int64)
    if events and patterns.any():
        uniq, inverse = np.unique(patterns, axis=0, return_inverse=True)
        dist = _pattern_probabilities(sched, uniq)
        inverse = inverse.reshape(-1)
    else:
        dist = _ideal_distribution(sched)[None, :]
        inverse = np.zeros(shots, dtype=np.int64)
    cdf = np.cumsum(dist, axis=1)
    cdf[:, -1] = 1.0
    outcome = (cdf[inverse] <= draws[:, -1:]).sum(axis=1)
    if m:
        flips = draws[:, events: events + m] < np.asarray(sched.flips)
        outcome = outcome ^ (flips.astype(np.int64) @ (1 << np.arange(m - 1, -1, -1)))
    tally = np.bincount(outcome, minlength=2**m)
    counts = {format(i, f"0{m}b") if m else "": int(c) for i, c in enumerate(tally) if c}
    return CountsTable(counts, shots)


def execute_batch(request: ExecutionRequest) -> list[CountsTable]:
    """Sample every circuit in ``request``; output is a pure function of the request."""
    noise = request.noise or IDEAL
    noise.check_device(request.device)
    streams = request.streams if request.streams is not None else range(len(request.circuits))
    out = []
    for circ, stream in zip(request.circuits, streams):
        sched = _lower(circ, request.device, noise)
        out.append(_run_one(sched, request.shots, circuit_rng(request.seed, stream)))
    return out


# ---------------------------------------------------------------------------
# Exact density-matrix oracle


def depolarizing_kraus(k: int, p: float) -> list[np.ndarray]:
    """Kraus operators of the k-qubit depolarizing channel with replacement weight p."""
    d2 = 4**k
    ops = [math.sqrt(1 - p + p / d2) * np.eye(2**k, dtype=complex)]
    ops += [math.sqrt(p / d2) * _pauli_string(i, k) for i in range(1, d2)]
    return ops


def measure_prepare_kraus() -> list[np.ndarray]:
    """Intercept-resend in Z: measure, then re-prepare the observed eigenstate."""
    return [np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)]


class _Density:
    """Density matrix over lazily activated wires; untouched wires stay |0><0|."""

    def __init__(self, n: int):
        self.rho = np.ones((), dtype=complex)
        self.axes: list[int] = []  # wire held by each ket axis
        self.wire = list(range(n))  # qubit -> wire currently holding its state

    def _activate(self, w: int) -> int:
        if w not in self.axes:
            zero = np.zeros((2, 2), dtype=complex)
            zero[0, 0] = 1.0
            k = len(self.axes)
            # new ket axis at position k, new bra axis appended last
            rho = np.tensordot(self.rho, zero, axes=0)
            order = list(range(k)) + [2 * k] + list(range(k, 2 * k)) + [2 * k + 1]
            self.rho = np.transpose(rho, order)
            self.axes.append(w)
        return self.axes.index(w)

    def positions(self, qubits: Sequence[int]) -> list[int]:
        return [self._activate(self.wire[q]) for q in qubits]

    def swap_labels(self, a: int, b: int) -> None:
        self.wire[a], self.wire[b] = self.wire[b], self.wire[a]

    def unitary(self, u: np.ndarray, qubits: Sequence[int]) -> None:
        self.kraus([u], qubits)

    def kraus(self, ops: Sequence[np.ndarray], qubits: Sequence[int]) -> None:
        pos = self.positions(qubits)
        k, n = len(pos), len(self.axes)
        bra = [p + n for p in pos]
        total = None
        for op in ops:
            t = op.reshape((2,) * (2 * k))
            r = np.tensordot(t, self.rho, axes=(list(range(k, 2 * k)), pos))
            r = np.moveaxis(r, list(range(k)), pos)
            r = np.tensordot(r, t.conj(), axes=(bra, list(range(k, 2 * k))))
            r = np.moveaxis(r, list(range(2 * n - k, 2 * n)), bra)
            total = r if total is None else total + r
        self.rho = total

    def depolarize(self, p: float, qubits: Sequence[int]) -> None:
        pos = self.positions(qubits)
        k, n = len(pos), len(self.axes)
        rest = self.rho
        # trace out the channel's support, most distant axes first
        for i, ax in sorted(enumerate(pos), key=lambda t: -t[1]):
            rest = np.trace(rest, axis1=ax, axis2=ax + rest.ndim // 2)
        mixed = np.eye(2**k, dtype=complex).reshape((2,) * (2 * k)) / 2**k
        full = np.tensordot(rest, mixed, axes=0)
        # axes now: remaining kets, remaining bras, support kets (pos order), support bras
        others = [a for a in range(n) if a not in pos]
        src = [None] * (2 * n)
        m = len(others)
        for j, a in enumerate(others):
            src[a] = j
            src[a + n] = m + j
        for j, a in enumerate(pos):
            src[a] = 2 * m + j
            src[a + n] = 2 * m + k + j
        full = np.transpose(full, src)
        self.rho = (1 - p) * self.rho + p * full

    def distribution(self, measured: Sequence[int]) -> np.ndarray:
        pos = self.positions(measured)
        n = len(self.axes)
        diag = np.einsum(self.rho.reshape(2**n, 2**n), [0, 0], [0]) if n else np.ones(1)
        probs = np.real(diag).reshape((2,) * n)
        drop = tuple(a for a in range(n) if a not in pos)
        marg = probs.sum(axis=drop) if drop else probs
        kept = [a for a in range(n) if a in pos]
        return np.transpose(marg, [kept.index(p) for p in pos]).reshape(-1)


def _readout(dist: np.ndarray, flips: Sequence[float]) -> np.ndarray:
    m = len(flips)
    t = dist.reshape((2,) * m) if m else dist
    for i, r in enumerate(flips):
        conf = np.array([[1 - r, r], [r, 1 - r]])
        t = np.moveaxis(np.tensordot(conf, t, axes=([1], [i])), 0, i)
    return t.reshape(-1)


@functools.lru_cache(maxsize=16384)
def _oracle_cached(ops: tuple, n: int, measured: tuple, flips: tuple, lattice: bool, extra_key: tuple) -> tuple[float, ...]:
    extra = dict(extra_key)
    state = _Density(n)
    for i, (sig, wires, p) in enumerate(ops):
        if sig[0] == qc.SWAP and (not lattice or p == 0):
            # exact relabeling; lattice SWAPs are decomposed only when noisy
            state.swap_labels(*wires)
            if p > 0:
                state.depolarize(p, wires)
        elif sig[0] == qc.SWAP:
            a, b = wires
            for c, t in ((a, b), (b, a), (a, b)):
                state.unitary(gate_unitary(qc.cx(c, t)), (c, t))
                state.depolarize(p, (c, t))
        else:
            kind, axis, sign, phase = sig
            state.unitary(gate_unitary(Gate(kind, wires, axis, sign, phase)), wires)
            if p > 0:
                state.depolarize(p, wires)
        for chan, qubits in extra.get(i, ()):
            state.kraus([np.asarray(o) for o in chan], qubits)
    dist = _readout(state.distribution(measured), flips)
    return tuple(float(x) for x in dist)


def density_oracle(
    circuit: Circuit,
    noise: NoiseModel | None = None,
    device: DeviceTopology | None = None,
    extra_channels: Mapping[int, Sequence[tuple[Sequence[np.ndarray], Sequence[int]]]] | None = None,
) -> dict[str, float]:
    """Exact outcome distribution of ``circuit`` under ``noise``.

    ``extra_channels`` maps a gate index to Kraus channels ``(ops, qubits)``
    applied right after that gate (qubits are physical ids).
    """
    noise = noise or IDEAL
    if device is not None:
        _bind(circuit, device)
    # wires are numbered by first appearance so relabeled circuits share a cache entry
    wire: dict[int, int] = {}
    ops = []
    for g in circuit.gates:
        p = noise.one(g.qubits[0]) if len(g.qubits) == 1 else noise.two(*g.qubits)
        wires = tuple(wire.setdefault(q, len(wire)) for q in g.qubits)
        ops.append(((g.kind, g.axis, g.sign, g.phase), wires, p))
    measured = tuple(wire.setdefault(q, len(wire)) for q in circuit.measured)
    if not wire:
        raise qc.CircuitError("circuit touches no qubits")
    if len(wire) > ORACLE_MAX_QUBITS:
        raise SimulationError(f"too many qubits for the density oracle: {len(wire)} > {ORACLE_MAX_QUBITS}")
    flips = tuple(noise.flip(q) for q in circuit.measured)
    lattice = device is not None and not device.all_to_all
    extra_key: tuple = ()
    if extra_channels:
        extra_key = tuple(
            sorted(
                (
                    int(i),
                    tuple(
                        (tuple(_freeze(o) for o in chan), tuple(wire[q] for q in qubits))
                        for chan, qubits in chans
                    ),
                )
                for i, chans in extra_channels.items()
            )
        )
    dist = _oracle_cached(tuple(ops), len(wire), measured, flips, lattice, extra_key)
    m = len(measured)
    return {format(i, f"0{m}b") if m else "": p for i, p in enumerate(dist)}


class _Frozen(tuple):
    """Hashable matrix wrapper usable as an lru_cache key."""

    def __array__(self, dtype=None, copy=None):
        arr = np.array(self[1], dtype=complex).reshape(self[0])
        return arr if dtype is None else arr.astype(dtype)


def _freeze(m: Any) -> _Frozen:
    a = np.asarray(m, dtype=complex)
    return _Frozen((a.shape, tuple(a.reshape(-1).tolist())))


def total_variation(counts: CountsTable, dist: Mapping[str, float]) -> float:
    keys = set(counts.counts) | set(dist)
    return 0.5 * sum(abs(counts.probability(k) - dist.get(k, 0.0)) for k in keys)


# ---------------------------------------------------------------------------
# Replay


def replay_key(meta: Mapping[str, Any], take: int = 1) -> tuple:
    paths = meta.get("paths") or ()
    return (
        meta.get("protocol"),
        meta.get("stage"),
        meta.get("rectangle"),
        tuple(tuple(int(q) for q in p) for p in paths),
        meta.get("setting"),
        int(take),
    )


class ReplayBackend:
    """Serves recorded counts keyed by (protocol, stage, rectangle, paths, setting, take)."""

    def __init__(self, records: Iterable[Mapping[str, Any]]):
        self._table: dict[tuple, dict[str, Any]] = {}
        for r in records:
            meta = {
                "protocol": r["protocol"],
                "stage": r["stage"],
                "rectangle": r.get("rectangle"),
                "paths": r.get("paths") or [r["path"]],
                "setting": r["setting"],
            }
            self._table[replay_key(meta, r.get("take", 1))] = r

    def __len__(self) -> int:
        return len(self._table)

    def lookup(self, circuit: Circuit, take: int = 1) -> dict[str, Any]:
        key = replay_key(circuit.meta, take)
        try:
            return self._table[key]
        except KeyError:
            protocol, stage, rect, paths, setting, _ = key
            raise NoRecordedData(
                f"no recorded data for protocol={protocol} stage={stage} rectangle={rect} "
                f"path={[list(p) for p in paths]} setting={setting} take={take}"
            ) from None

    def execute(self, circuits: Sequence[Circuit], take: int = 1) -> list[CountsTable]:
        out = []
        for c in circuits:
            rec = self.lookup(c, take)
            out.append(CountsTable(dict(rec["counts"]), int(rec["shots"])))
        return out


def replay_execute(backend: ReplayBackend, circuits: Sequence[Circuit], take: int = 1) -> list[CountsTable]:
    return backend.execute(circuits, take)
