"""Device connectivity, heavy-hex rectangle extraction and stage path sets.

A rectangle is a 12-qubit cycle of a heavy-hex lattice: two 5-qubit row
chains joined by two bridge qubits. Its corners are the four chain ends.
Corner-to-corner (C2C), maximal-length (ML) and all-lengths (AL) path sets
are enumerated over the cycle only.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

C2C, ML, AL = "c2c", "ML", "AL"
STAGES = (C2C, ML, AL)
CYCLE_LEN = 12


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class QubitPath:
    qubits: tuple[int, ...]
    stage: str = AL

    def __post_init__(self) -> None:
        if len(self.qubits) < 2:
            raise TopologyError(f"a path needs at least 2 qubits, got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise TopologyError(f"path revisits a qubit: {self.qubits}")

    @property
    def start(self) -> int:
        return self.qubits[0]

    @property
    def end(self) -> int:
        return self.qubits[-1]

    @property
    def swaps(self) -> int:
        return len(self.qubits) - 1

    def __len__(self) -> int:
        return len(self.qubits)

    def __iter__(self):
        return iter(self.qubits)


@dataclass(frozen=True)
class Rectangle:
    index: int
    cycle: tuple[int, ...]
    corners: tuple[int, int, int, int]

    def __post_init__(self) -> None:
        if len(self.cycle) != CYCLE_LEN or len(set(self.cycle)) != CYCLE_LEN:
            raise TopologyError(f"rectangle {self.index}: cycle must hold 12 distinct qubits")
        if not set(self.corners) <= set(self.cycle):
            raise TopologyError(f"rectangle {self.index}: corners must lie on the cycle")
        pos = {q: i for i, q in enumerate(self.cycle)}
        for a, b in ((self.corners[0], self.corners[2]), (self.corners[1], self.corners[3])):
            if _cycle_distance(pos[a], pos[b]) != CYCLE_LEN // 2:
                raise TopologyError(f"rectangle {self.index}: corners {a},{b} are not antipodal")

    @property
    def qubits(self) -> frozenset[int]:
        return frozenset(self.cycle)

    def position(self, q: int) -> int:
        return self.cycle.index(q)

    def edges(self) -> list[tuple[int, int]]:
        return [_edge(self.cycle[i], self.cycle[(i + 1) % CYCLE_LEN]) for i in range(CYCLE_LEN)]

    def to_dict(self) -> dict[str, Any]:
        return {"index": self.index, "cycle": list(self.cycle), "corners": list(self.corners)}


def _cycle_distance(i: int, j: int) -> int:
    d = abs(i - j) % CYCLE_LEN
    return min(d, CYCLE_LEN - d)


def _edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class DeviceTopology:
    name: str
    num_qubits: int
    edges: frozenset[tuple[int, int]] | None = None  # None means all-to-all
    embedding: Mapping[int, tuple[int, int]] | None = field(default=None, compare=False)
    rectangle_override: tuple[Rectangle, ...] | None = field(default=None, compare=False)
    noise: Mapping[str, Any] | None = field(default=None, compare=False)

    @property
    def all_to_all(self) -> bool:
        return self.edges is None

    @property
    def kind(self) -> str:
        return "all_to_all" if self.all_to_all else "lattice"

    def adjacent(self, a: int, b: int) -> bool:
        if a == b:
            return False
        if self.all_to_all:
            return 0 <= a < self.num_qubits and 0 <= b < self.num_qubits
        return _edge(a, b) in self.edges

    def neighbors(self, q: int) -> list[int]:
        if self.all_to_all:
            return [p for p in range(self.num_qubits) if p != q]
        return sorted(self._adjacency().get(q, ()))

    def _adjacency(self) -> dict[int, set[int]]:
        adj = self.__dict__.get("_adj")
        if adj is None:
            adj = {q: set() for q in range(self.num_qubits)}
            for a, b in self.edges or ():
                adj[a].add(b)
                adj[b].add(a)
            object.__setattr__(self, "_adj", adj)
        return adj

    def distance(self, a: int, b: int) -> int:
        if self.all_to_all:
            return 0 if a == b else 1
        seen = {a: 0}
        queue = deque([a])
        while queue:
            u = queue.popleft()
            if u == b:
                return seen[u]
            for v in self._adjacency()[u]:
                if v not in seen:
                    seen[v] = seen[u] + 1
                    queue.append(v)
        raise TopologyError(f"qubits {a} and {b} are disconnected")


def topology_from_dict(data: Mapping[str, Any]) -> DeviceTopology:
    """Validate a device descriptor and build its topology."""
    try:
        name = str(data["name"])
        n = int(data["num_qubits"])
        conn = data["connectivity"]
    except KeyError as exc:
        raise TopologyError(f"device descriptor missing field {exc.args[0]!r}") from None
    if n <= 0:
        raise TopologyError("num_qubits must be positive")

    edges: frozenset[tuple[int, int]] | None
    if conn == "all_to_all":
        edges = None
    elif isinstance(conn, list):
        found = set()
        for pair in conn:
            a, b = int(pair[0]), int(pair[1])
            if a == b:
                raise TopologyError(f"self-loop on qubit {a}")
            for q in (a, b):
                if not 0 <= q < n:
                    raise TopologyError(f"qubit index {q} out of range for {n} qubits")
            found.add(_edge(a, b))
        edges = frozenset(found)
    else:
        raise TopologyError(f"unknown connectivity kind {conn!r}")

    embedding = None
    if data.get("embedding") is not None:
        embedding = {int(q): (int(rc[0]), int(rc[1])) for q, rc in data["embedding"].items()}

    override = None
    if data.get("rectangles"):
        override = tuple(
            Rectangle(int(r["index"]), tuple(int(q) for q in r["cycle"]), tuple(int(q) for q in r["corners"]))
            for r in data["rectangles"]
        )

    topo = DeviceTopology(name, n, edges, embedding, override, data.get("noise"))
    if edges is not None:
        _check_connected(topo)
        if override:
            for rect in override:
                for a, b in rect.edges():
                    if (a, b) not in edges:
                        raise TopologyError(f"rectangle {rect.index} uses missing edge {a}-{b}")
    return topo


def _check_connected(topo: DeviceTopology) -> None:
    adj = topo._adjacency()
    seen = {0}
    stack = [0]
    while stack:
        for v in adj[stack.pop()]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if len(seen) != topo.num_qubits:
        raise TopologyError(f"device graph is disconnected ({len(seen)} of {topo.num_qubits} qubits reachable)")


BUILTIN_DEVICES = ("ibex-like", "eagle-like", "heron-like")


def builtin_device_path(name: str) -> Path:
    return Path(__file__).parent / "data" / "devices" / f"{name}.json"


def load_device(source: str | Path | Mapping[str, Any]) -> DeviceTopology:
    """Load a descriptor from a mapping, a JSON file path, or a built-in name."""
    if isinstance(source, Mapping):
        return topology_from_dict(source)
    text = str(source)
    if text in BUILTIN_DEVICES:
        source = builtin_device_path(text)
    path = Path(source)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise TopologyError(f"{path}: invalid JSON ({exc})") from None
    return topology_from_dict(data)


def _twelve_cycles(topo: DeviceTopology) -> list[frozenset[int]]:
    adj = topo._adjacency()
    found: set[frozenset[int]] = set()
    for start in range(topo.num_qubits):
        # DFS over nodes larger than start so each cycle is rooted at its minimum
        stack = [(start, (start,))]
        while stack:
            u, path = stack.pop()
            for v in adj[u]:
                if v == start and len(path) == CYCLE_LEN:
                    found.add(frozenset(path))
                elif v > start and v not in path and len(path) < CYCLE_LEN:
                    stack.append((v, path + (v,)))
    return sorted(found, key=sorted)


def _order_cycle(members: frozenset[int], topo: DeviceTopology) -> list[int]:
    adj = topo._adjacency()
    first = min(members)
    order = [first]
    prev = None
    while len(order) < CYCLE_LEN:
        nxt = sorted(v for v in adj[order[-1]] if v in members and v != prev and v not in order)
        if not nxt:
            break
        prev = order[-1]
        order.append(nxt[0])
    return order


def partition_rectangles(topo: DeviceTopology) -> list[Rectangle]:
    """All 12-cycle unit cells, indexed 1..R row-major over the embedding."""
    if topo.all_to_all:
        raise TopologyError("rectangles undefined for all-to-all devices")
    if topo.rectangle_override:
        return sorted(topo.rectangle_override, key=lambda r: r.index)
    if not topo.embedding:
        raise TopologyError(f"{topo.name}: rectangle extraction needs an embedding or an explicit rectangle list")
    emb = topo.embedding
    cells = []
    for members in _twelve_cycles(topo):
        order = _order_cycle(members, topo)
        # bridges pass vertically: neither cycle neighbour shares their row
        bridges = [
            i for i, q in enumerate(order)
            if emb[q][0] not in (emb[order[i - 1]][0], emb[order[(i + 1) % CYCLE_LEN]][0])
        ]
        if len(bridges) != 2 or _cycle_distance(*bridges) != CYCLE_LEN // 2:
            continue
        corner_pos = {(b + s) % CYCLE_LEN for b in bridges for s in (-1, 1)}
        corners = [order[i] for i in corner_pos]
        top_left = min(corners, key=lambda q: emb[q])
        i0 = order.index(top_left)
        # walk from the top-left corner along its own row first
        fwd = order[(i0 + 1) % CYCLE_LEN]
        step = 1 if emb[fwd][0] == emb[top_left][0] else -1
        cycle = tuple(order[(i0 + step * k) % CYCLE_LEN] for k in range(CYCLE_LEN))
        cells.append((cycle, (cycle[0], cycle[4], cycle[6], cycle[10])))
    if not cells:
        raise TopologyError(f"{topo.name}: no 12-cycle cells found")
    cells.sort(key=lambda c: emb[c[0][0]])
    return [Rectangle(i + 1, cyc, corners) for i, (cyc, corners) in enumerate(cells)]


def _arc(cycle: Sequence[int], i: int, j: int, step: int) -> tuple[int, ...]:
    n = len(cycle)
    out = [cycle[i]]
    k = i
    while k != j:
        k = (k + step) % n
        out.append(cycle[k])
    return tuple(out)


def _minimal_routes(cycle: Sequence[int], i: int, j: int) -> list[tuple[int, ...]]:
    n = len(cycle)
    fwd = (j - i) % n
    routes = []
    if fwd <= n - fwd:
        routes.append(_arc(cycle, i, j, 1))
    if n - fwd <= fwd:
        routes.append(_arc(cycle, i, j, -1))
    return routes


def enumerate_paths(rect: Rectangle, stage: str) -> list[QubitPath]:
    """Directed stage paths inside ``rect``, in deterministic order."""
    cyc = rect.cycle
    pos = {q: i for i, q in enumerate(cyc)}
    half = CYCLE_LEN // 2
    routes: list[tuple[int, ...]] = []
    if stage == C2C:
        c = rect.corners
        for a, b in ((c[0], c[2]), (c[2], c[0]), (c[1], c[3]), (c[3], c[1])):
            routes += _minimal_routes(cyc, pos[a], pos[b])
    elif stage == ML:
        for i in range(CYCLE_LEN):
            j = (i + half) % CYCLE_LEN
            routes += _minimal_routes(cyc, i, j)
    elif stage == AL:
        for i in range(CYCLE_LEN):
            for j in range(CYCLE_LEN):
                if i != j:
                    routes += _minimal_routes(cyc, i, j)
    else:
        raise TopologyError(f"unknown stage {stage!r}")
    routes.sort(key=lambda r: (r[0], r[-1], r))
    return [QubitPath(r, stage) for r in routes]


def swap_distance(topo: DeviceTopology, a: int, b: int, path: QubitPath | None = None) -> int:
    if a == b:
        raise TopologyError("swap distance needs two distinct qubits")
    if topo.all_to_all:
        return 1
    if path is not None:
        if path.start != a or path.end != b:
            raise TopologyError(f"path {path.qubits} does not run from {a} to {b}")
        return path.swaps
    return topo.distance(a, b)


def check_path(topo: DeviceTopology, path: QubitPath) -> None:
    for a, b in zip(path.qubits, path.qubits[1:]):
        if not topo.adjacent(a, b):
            raise TopologyError(f"path {path.qubits}: {a} and {b} are not coupled")


def extend_backwards(rect: Rectangle, path: QubitPath, extra: int) -> tuple[int, ...]:
    """Prefix ``path`` with ``extra`` cycle qubits continuing behind its start.

    Multi-qubit work registers sit on these trailing qubits and are shifted
    along the path as a block.
    """
    cyc = rect.cycle
    i = cyc.index(path.start)
    step = 1 if cyc[(i + 1) % CYCLE_LEN] == path.qubits[1] else -1
    if len(path) + extra > CYCLE_LEN:
        raise TopologyError("work register does not fit inside the rectangle")
    behind = [cyc[(i - step * k) % CYCLE_LEN] for k in range(extra, 0, -1)]
    return tuple(behind) + path.qubits


# ---------------------------------------------------------------------------
# Heavy-hex generators for the shipped descriptors.


def _heavy_hex(name: str, row_sizes: Sequence[tuple[int, int]], bridge_cols: Sequence[Sequence[int]]) -> dict[str, Any]:
    """Build a heavy-hex descriptor.

    ``row_sizes`` gives (first column, qubit count) per chain row and
    ``bridge_cols`` the columns of the bridges below each row except the last.
    Numbering follows IBM's convention: a row, then the bridges below it.
    """
    edges: list[list[int]] = []
    embedding: dict[str, list[int]] = {}
    rows: list[dict[int, int]] = []
    q = 0
    bridge_ids: list[list[tuple[int, int]]] = []
    for r, (c0, size) in enumerate(row_sizes):
        row = {}
        for c in range(c0, c0 + size):
            row[c] = q
            embedding[str(q)] = [2 * r, c]
            if c > c0:
                edges.append([q - 1, q])
            q += 1
        rows.append(row)
        if r < len(bridge_cols):
            ids = []
            for c in bridge_cols[r]:
                embedding[str(q)] = [2 * r + 1, c]
                ids.append((c, q))
                q += 1
            bridge_ids.append(ids)
    for r, ids in enumerate(bridge_ids):
        for c, b in ids:
            edges.append([rows[r][c], b])
            edges.append([b, rows[r + 1][c]])
    edges.sort()
    return {"name": name, "num_qubits": q, "connectivity": edges, "embedding": embedding}


def eagle_descriptor(name: str = "eagle-like") -> dict[str, Any]:
    """127-qubit Eagle-r3 style heavy-hex map (18 rectangles)."""
    even, odd = [0, 4, 8, 12], [2, 6, 10, 14]
    rows = [(0, 14)] + [(0, 15)] * 5 + [(1, 14)]
    return _heavy_hex(name, rows, [even, odd, even, odd, even, odd])


def heron_descriptor(name: str = "heron-like") -> dict[str, Any]:
    """156-qubit Heron-r2 style heavy-hex map (21 rectangles)."""
    a, b = [3, 7, 11, 15], [1, 5, 9, 13]
    return _heavy_hex(name, [(0, 16)] * 8, [a, b, a, b, a, b, a])


def all_to_all_descriptor(name: str = "ibex-like", n: int = 12) -> dict[str, Any]:
    return {"name": name, "num_qubits": n, "connectivity": "all_to_all"}


def describe(topo: DeviceTopology) -> dict[str, Any]:
    out: dict[str, Any] = {"name": topo.name, "num_qubits": topo.num_qubits}
    out["connectivity"] = "all_to_all" if topo.all_to_all else [list(e) for e in sorted(topo.edges)]
    if topo.embedding:
        out["embedding"] = {str(q): list(rc) for q, rc in sorted(topo.embedding.items())}
    return out


def qubits_of(paths: Iterable[QubitPath]) -> set[int]:
    return {q for p in paths for q in p.qubits}
