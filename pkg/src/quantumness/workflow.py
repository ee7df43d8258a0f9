"""Staged lookup workflows for all-to-all (ion-trap) and heavy-hex (lattice) devices.

Both engines execute protocol stages through a backend, append every circuit
result to a JSONL log, and gate later stages on the survivors of earlier ones.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from . import protocols as pr
from .fidelity import (
    PER_QUBIT,
    PER_RECTANGLE,
    FidelityError,
    FidelityEstimate,
    FidelityRecord,
    aggregate,
    estimate_row,
    instance_fidelity,
    per_rectangle,
    stage_pass,
)
from .protocols import ProtocolInstance, ProtocolKind, parse_kind, threshold_for
from .reporting import (
    CONVENTIONS,
    FAILED,
    NOT_RUN,
    PASSED,
    SCHEMA_VERSION,
    ResultsError,
    ResultsLog,
    load_results,
    make_manifest,
)
from .simulator import (
    IDEAL,
    CountsTable,
    ExecutionRequest,
    NoiseModel,
    NoRecordedData,
    ReplayBackend,
    SimulationError,
    execute_batch,
)
from .topology import (
    C2C,
    STAGES,
    DeviceTopology,
    TopologyError,
    enumerate_paths,
    load_device,
    partition_rectangles,
)

SIMULATOR, REPLAY = "simulator", "replay"
AL_STAGE = "AL"

ION_DEFAULT = tuple(k.label for k in pr.TABLE_ORDER if k.name != pr.CAT)
LATTICE_DEFAULT = tuple(k.label for k in pr.TABLE_ORDER)

CONFIG_KEYS = {
    "device",
    "backend",
    "replay_log",
    "noise",
    "protocols",
    "stages",
    "shots",
    "seed",
    "k",
    "max_alice_camps",
    "thresholds",
    "cat_threshold",
    "takes",
    "timestamp",
    "log_circuits",
    "rectangles",
    "output_dir",
}


class ConfigError(ValueError):
    pass


class BackendError(RuntimeError):
    pass


class WorkflowInterrupted(RuntimeError):
    """Raised when a run is stopped on purpose after a given number of stages."""


@dataclass(frozen=True)
class TakeRule:
    count: int = 1
    use: int = 1


@dataclass
class WorkflowConfig:
    device: DeviceTopology
    backend: str = SIMULATOR
    shots: int = 1000
    seed: int = 0
    k: int = 4
    protocols: tuple[str, ...] = ()
    stages: tuple[str, ...] = STAGES
    noise: NoiseModel = IDEAL
    replay_log: Path | None = None
    max_alice_camps: int | None = None
    thresholds: dict[str, float] = field(default_factory=dict)
    cat_threshold: float = pr.DEFAULT_CAT_THRESHOLD
    takes: dict[str, TakeRule] = field(default_factory=dict)
    timestamp: str | None = None
    log_circuits: bool = False
    rectangles: tuple[int, ...] | None = None
    output_dir: str | None = None
    raw: dict[str, Any] = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()

    @property
    def run_id(self) -> str:
        return "run-" + self.config_hash[:12]

    def enabled(self, kind: ProtocolKind) -> bool:
        return kind.label in self.protocols

    def threshold(self, kind: ProtocolKind) -> float:
        return float(self.thresholds.get(kind.label, threshold_for(kind, self.cat_threshold)))

    def take_rule(self, kind: ProtocolKind, stage: str) -> TakeRule:
        return self.takes.get(f"{kind.label}/{stage}", TakeRule())


def _int(data: Mapping[str, Any], key: str, default: int, low: int) -> int:
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < low:
        raise ConfigError(f"{key} must be an integer >= {low}, got {value!r}")
    return value


def config_from_dict(data: Mapping[str, Any], base_dir: str | Path | None = None) -> WorkflowConfig:
    """Validate a workflow config mapping; every problem raises :class:`ConfigError`."""
    if not isinstance(data, Mapping):
        raise ConfigError("config must be a mapping")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "device" not in data:
        raise ConfigError("config needs a device")
    base = Path(base_dir) if base_dir else Path.cwd()
    ref = data["device"]
    try:
        if isinstance(ref, str) and not Path(ref).is_absolute() and (base / ref).exists():
            device = load_device(base / ref)
        else:
            device = load_device(ref)
    except (TopologyError, OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad device: {exc}") from exc

    backend = data.get("backend", SIMULATOR)
    if backend not in (SIMULATOR, REPLAY):
        raise ConfigError(f"backend must be {SIMULATOR!r} or {REPLAY!r}, got {backend!r}")
    replay_log = None
    if backend == REPLAY:
        if not data.get("replay_log"):
            raise ConfigError("replay backend needs replay_log")
        replay_log = Path(data["replay_log"])
        if not replay_log.is_absolute():
            replay_log = base / replay_log

    shots = _int(data, "shots", 1000, 1)
    seed = _int(data, "seed", 0, 0)
    k = _int(data, "k", 4, 0)
    if device.all_to_all and k >= device.num_qubits:
        raise ConfigError(f"k = {k} must be smaller than the device's {device.num_qubits} qubits")

    noise_spec = data.get("noise", "device")
    try:
        if noise_spec == "device":
            noise = NoiseModel.from_dict({k2: v for k2, v in (device.noise or {}).items()})
        elif noise_spec in ("ideal", None):
            noise = IDEAL
        elif isinstance(noise_spec, Mapping):
            noise = NoiseModel.from_dict(noise_spec)
        else:
            raise ConfigError(f"noise must be 'device', 'ideal' or a mapping, got {noise_spec!r}")
        noise.check_device(device)
    except ValueError as exc:
        raise ConfigError(f"bad noise model: {exc}") from exc

    default = ION_DEFAULT if device.all_to_all else LATTICE_DEFAULT
    labels = []
    for item in data.get("protocols", default):
        try:
            if isinstance(item, Mapping):
                kind = ProtocolKind(item["name"], item.get("M"), item.get("J"))
            else:
                kind = parse_kind(str(item))
        except (pr.ProtocolError, KeyError) as exc:
            raise ConfigError(f"bad protocol entry {item!r}: {exc}") from exc
        if kind not in pr.TABLE_ORDER:
            raise ConfigError(f"protocol {kind.label} is not part of the workflow")
        labels.append(kind.label)
    for required in (pr.TRANSMIT, pr.DO_NOTHING):
        if required not in labels:
            raise ConfigError(f"{required} is required: it gates every other stage")

    stages = tuple(data.get("stages", STAGES))
    if C2C not in stages or any(s not in STAGES for s in stages) or len(set(stages)) != len(stages):
        raise ConfigError(f"stages must include {C2C} and be distinct entries of {list(STAGES)}")
    stages = tuple(s for s in STAGES if s in stages)

    max_alice = data.get("max_alice_camps")
    if max_alice is not None and (not isinstance(max_alice, int) or max_alice < 1):
        raise ConfigError("max_alice_camps must be a positive integer")

    thresholds = {}
    for label, value in (data.get("thresholds") or {}).items():
        try:
            parse_kind(label)
        except pr.ProtocolError as exc:
            raise ConfigError(f"threshold for unknown protocol {label!r}") from exc
        if not 0.0 <= float(value) <= 1.0:
            raise ConfigError(f"threshold {label} = {value} outside [0, 1]")
        thresholds[label] = float(value)
    cat_threshold = float(data.get("cat_threshold", pr.DEFAULT_CAT_THRESHOLD))

    takes = {}
    for key, rule in (data.get("takes") or {}).items():
        parts = key.split("/")
        if len(parts) != 2 or parts[1] not in STAGES:
            raise ConfigError(f"take key {key!r} must look like 'protocol/stage'")
        count = rule.get("count", 1)
        use = rule.get("use", count)
        if not (isinstance(count, int) and isinstance(use, int) and 1 <= use <= count):
            raise ConfigError(f"take rule {key}: need 1 <= use <= count")
        takes[key] = TakeRule(count, use)

    rects = data.get("rectangles")
    if rects is not None:
        if device.all_to_all:
            raise ConfigError("rectangles cannot be selected on an all-to-all device")
        known = {r.index for r in partition_rectangles(device)}
        bad = [r for r in rects if r not in known]
        if bad:
            raise ConfigError(f"unknown rectangle index {bad[0]}")
        rects = tuple(sorted(set(rects)))

    timestamp = data.get("timestamp")
    return WorkflowConfig(
        device=device,
        backend=backend,
        shots=shots,
        seed=seed,
        k=k,
        protocols=tuple(labels),
        stages=stages,
        noise=noise,
        replay_log=replay_log,
        max_alice_camps=max_alice,
        thresholds=thresholds,
        cat_threshold=cat_threshold,
        takes=takes,
        timestamp=None if timestamp is None else str(timestamp),
        log_circuits=bool(data.get("log_circuits", False)),
        rectangles=rects,
        output_dir=data.get("output_dir"),
        raw=json.loads(json.dumps(dict(data))),
    )


def load_config(path: str | Path) -> WorkflowConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data, path.parent)


def resolve_timestamp(pinned: str | None) -> str:
    """Pinned config value, else SOURCE_DATE_EPOCH, else the current UTC time."""
    if pinned:
        return pinned
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (
        _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc)
        if epoch
        else _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0)
    )
    return when.isoformat().replace("+00:00", "Z")


def stage_seed(master: int, label: str, stage: str, take: int) -> int:
    digest = hashlib.sha256(f"{master}:{label}/{stage}/{take}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


# ---------------------------------------------------------------------------
# Filtering helpers


def select_worst_qubits(estimates: Sequence[FidelityEstimate], k: int) -> set[int]:
    """The k qubits ranked worst by (min, mean, index)."""
    if any(e.key.kind != PER_QUBIT for e in estimates):
        raise FidelityError("select_worst_qubits needs per-qubit estimates")
    if k >= len(estimates):
        raise FidelityError(f"cannot remove k = {k} of {len(estimates)} qubits")
    ranked = sorted(estimates, key=lambda e: (e.min, e.mean, e.key.value[0]))
    return {e.key.value[0] for e in ranked[:k]}


def filter_records(records: Iterable[FidelityRecord], excluded: Iterable[int]) -> list[FidelityRecord]:
    ex = set(excluded)
    return [r for r in records if not (r.qubits & ex)]


def reduce_and_reaggregate(
    records: Iterable[FidelityRecord], excluded: Iterable[int], keying: str = PER_QUBIT
) -> list[FidelityEstimate]:
    """Aggregate only the records whose qubits avoid ``excluded``; nothing is re-executed."""
    kept = filter_records(records, excluded)
    if not kept:
        raise FidelityError("all records filtered out")
    return aggregate(kept, keying)


def greedy_reduced_chip(
    records: Sequence[FidelityRecord], qubits: Iterable[int], threshold: float, required: int
) -> tuple[list[int], float | None]:
    """Drop the worst qubit until every remaining record passes.

    Returns the surviving qubits and their minimum fidelity, or ``([], None)``
    once fewer than ``required`` qubits remain.
    """
    current = set(qubits)
    while len(current) >= required:
        inside = [r for r in records if r.qubits <= current]
        if not inside:
            break
        ests = aggregate(inside, PER_QUBIT)
        if all(stage_pass(ests, threshold).values()):
            return sorted(current), min(r.fidelity for r in inside)
        worst = min(ests, key=lambda e: (e.min, e.mean, e.key.value[0]))
        current.discard(worst.key.value[0])
    return [], None


# ---------------------------------------------------------------------------
# Engine


class _Engine:
    def __init__(
        self,
        cfg: WorkflowConfig,
        log_path: str | Path | None = None,
        resume: bool = False,
        stop_after: int | None = None,
    ):
        self.cfg = cfg
        self.stop_after = stop_after
        self.stage_count = 0
        self.stages: list[dict[str, Any]] = []
        self.prior: dict[tuple, list[dict[str, Any]]] = {}
        self.timestamp = resolve_timestamp(cfg.timestamp)
        if resume and log_path is not None and Path(log_path).exists():
            records, manifest = load_results(log_path)
            if manifest.get("config_hash") != cfg.config_hash:
                raise ConfigError("cannot resume: the log was produced by a different config")
            self.timestamp = manifest.get("timestamp", self.timestamp)
            for r in records:
                self.prior.setdefault((r["protocol"], r["stage"], r.get("take", 1)), []).append(r)
        self.replay = None
        if cfg.backend == REPLAY:
            try:
                records, _ = load_results(cfg.replay_log)
            except (OSError, ResultsError) as exc:
                raise BackendError(f"cannot load replay log: {exc}") from exc
            self.replay = ReplayBackend(records)
        self.manifest = make_manifest(
            cfg.run_id, cfg.device.name, cfg.backend, cfg.seed, cfg.config_hash, self.timestamp, CONVENTIONS
        )
        self.log = ResultsLog(log_path, self.manifest) if log_path is not None else None

    def close(self) -> None:
        if self.log is not None:
            self.log.close()

    # -- execution ---------------------------------------------------------
    def _execute(self, kind: ProtocolKind, stage: str, take: int, jobs: list) -> list[dict[str, Any]]:
        cfg = self.cfg
        circuits = [c for _, _, c in jobs]
        prior = self.prior.get((kind.label, stage, take))
        if prior is not None and len(prior) == len(jobs):
            if all(
                r["setting"] == s.label and [list(q.qubits) for q in inst.paths] == r["paths"]
                for r, (inst, s, _) in zip(prior, jobs)
            ):
                return prior
        seed = stage_seed(cfg.seed, kind.label, stage, take)
        try:
            if self.replay is not None:
                tables = self.replay.execute(circuits, take)
            else:
                req = ExecutionRequest(circuits, cfg.device, cfg.shots, seed, cfg.noise)
                tables = execute_batch(req)
        except (NoRecordedData, SimulationError) as exc:
            raise BackendError(str(exc)) from exc
        out = []
        for (inst, setting, circ), table in zip(jobs, tables):
            rec = {
                "run_id": cfg.run_id,
                "device": cfg.device.name,
                "protocol": kind.label,
                "params": kind.params,
                "stage": stage,
                "path": list(inst.path or inst.paths[0].qubits),
                "paths": [list(p.qubits) for p in inst.paths],
                "rectangle": inst.rectangle,
                "setting": setting.label,
                "shots": table.shots,
                "counts": table.to_dict(),
                "timestamp": self.timestamp,
                "backend": cfg.backend,
                "seed": seed if self.replay is None else None,
                "take": take,
            }
            if cfg.log_circuits:
                rec["circuit"] = json.loads(json.dumps(circ.to_dict()))
            out.append(rec)
        return out

    def run_stage(
        self,
        kind: ProtocolKind,
        stage: str,
        instances: Sequence[ProtocolInstance],
        entering: Sequence[int],
        keying: str,
    ) -> tuple[list[FidelityRecord], list[FidelityEstimate]]:
        """Execute every take of a stage; return the records and estimates of the take in use."""
        if self.stop_after is not None and self.stage_count >= self.stop_after:
            raise WorkflowInterrupted(f"stopped before {kind.label}/{stage}")
        rule = self.cfg.take_rule(kind, stage)
        threshold = self.cfg.threshold(kind)
        jobs = [(inst, s, c) for inst in instances for s, c in inst.circuits()]
        used: tuple[list[FidelityRecord], list[FidelityEstimate]] = ([], [])
        for take in range(1, rule.count + 1):
            circuit_records = self._execute(kind, stage, take, jobs)
            if self.log is not None:
                self.log.append(circuit_records)
            by_instance: dict[int, dict[str, CountsTable]] = defaultdict(dict)
            for i, rec in enumerate(circuit_records):
                inst_idx = i // len(pr.settings_for(kind))
                by_instance[inst_idx][rec["setting"]] = CountsTable(dict(rec["counts"]), int(rec["shots"]))
            records = []
            for idx, inst in enumerate(instances):
                f, se = instance_fidelity(kind, by_instance[idx])
                records.append(
                    FidelityRecord(
                        protocol=kind.label,
                        stage=stage,
                        camp=inst.camp,
                        qubits=inst.touched,
                        fidelity=f,
                        stderr=se,
                        rectangle=inst.rectangle,
                        paths=tuple(p.qubits for p in inst.paths),
                        take=take,
                    )
                )
            estimates = aggregate(records, keying)
            passing = stage_pass(estimates, threshold)
            if keying == PER_RECTANGLE:
                surviving = [r for r in entering if passing.get(per_rectangle(r), False)]
            else:
                surviving = sorted(e.key.value[0] for e in estimates if passing[e.key])
            self.stages.append(
                {
                    "protocol": kind.label,
                    "stage": stage,
                    "take": take,
                    "used": take == rule.use,
                    "threshold": threshold,
                    "keying": keying,
                    "entering": list(entering),
                    "surviving": surviving,
                    "estimates": [estimate_row(e, threshold) for e in estimates],
                }
            )
            if take == rule.use:
                used = (records, estimates)
        self.stage_count += 1
        return used

    # -- report ------------------------------------------------------------
    def report(self, protocols: dict[str, dict[str, Any]], **extra: Any) -> dict[str, Any]:
        cfg = self.cfg
        passed = [set(v["subchip"]) for v in protocols.values() if v["status"] == PASSED]
        common = sorted(set.intersection(*passed)) if passed else []
        out = {
            "schema_version": SCHEMA_VERSION,
            "run_id": cfg.run_id,
            "device": cfg.device.name,
            "device_kind": cfg.device.kind,
            "backend": cfg.backend,
            "seed": cfg.seed,
            "shots": cfg.shots,
            "config_hash": cfg.config_hash,
            "timestamp": self.timestamp,
            "conventions": CONVENTIONS,
            "thresholds": {k.label: cfg.threshold(k) for k in pr.TABLE_ORDER},
            "stages": self.stages,
            "protocols": {k.label: protocols[k.label] for k in pr.TABLE_ORDER},
            "optimal_subchip": {
                "all_protocols": common,
                "per_protocol": {k: v["subchip"] for k, v in protocols.items() if v["status"] == PASSED},
            },
            "terminated_early": False,
        }
        out.update(extra)
        return out


def _entry(status: str, subchip: Iterable[int] = (), value: float | None = None, metric: str = "min") -> dict[str, Any]:
    return {"status": status, "subchip": list(subchip), "value": value, "metric": metric}


NOT_RUN_ENTRY = _entry(NOT_RUN)


# ---------------------------------------------------------------------------
# Ion-trap workflow


def run_ion_trap_workflow(
    cfg: WorkflowConfig,
    log_path: str | Path | None = None,
    resume: bool = False,
    stop_after: int | None = None,
) -> dict[str, Any]:
    """All-pairs transmit/do-nothing, exclusion of the k worst qubits, then per-protocol reduced chips."""
    if not cfg.device.all_to_all:
        raise ConfigError("the ion-trap workflow needs an all-to-all device")
    eng = _Engine(cfg, log_path, resume, stop_after)
    try:
        return _ion_trap(cfg, eng)
    finally:
        eng.close()


def _ion_trap(cfg: WorkflowConfig, eng: _Engine) -> dict[str, Any]:
    qubits = list(range(cfg.device.num_qubits))
    protocols = {k.label: dict(NOT_RUN_ENTRY) for k in pr.TABLE_ORDER}
    basic = [ProtocolKind(pr.TRANSMIT), ProtocolKind(pr.DO_NOTHING)]
    stage1: dict[str, list[FidelityRecord]] = {}
    for kind in basic:
        insts = pr.all_to_all_instances(kind, qubits, stage=AL_STAGE)
        stage1[kind.label], _ = eng.run_stage(kind, AL_STAGE, insts, qubits, PER_QUBIT)

    pooled = aggregate([r for recs in stage1.values() for r in recs], PER_QUBIT)
    excluded = sorted(select_worst_qubits(pooled, cfg.k))
    reduced = [q for q in qubits if q not in excluded]
    healthy = True
    for kind in basic:
        ests = reduce_and_reaggregate(stage1[kind.label], excluded)
        ok = all(stage_pass(ests, cfg.threshold(kind)).values())
        healthy &= ok
        value = min(e.min for e in ests)
        protocols[kind.label] = _entry(PASSED, reduced, value) if ok else _entry(FAILED)
    if not healthy:
        return eng.report(protocols, excluded=excluded, reduced_chip=reduced, terminated_early=True)

    later = [k for k in pr.TABLE_ORDER if k.name not in (pr.TRANSMIT, pr.DO_NOTHING)]
    for kind in later:
        if not cfg.enabled(kind):
            continue
        insts = pr.all_to_all_instances(kind, reduced, cfg.max_alice_camps, stage=AL_STAGE)
        if not insts:
            continue
        records, _ = eng.run_stage(kind, AL_STAGE, insts, reduced, PER_QUBIT)
        chip, value = greedy_reduced_chip(records, reduced, cfg.threshold(kind), kind.required_qubits)
        eng.stages[-1]["surviving"] = chip
        protocols[kind.label] = _entry(PASSED, chip, value) if chip else _entry(FAILED)
    return eng.report(protocols, excluded=excluded, reduced_chip=reduced)


# ---------------------------------------------------------------------------
# Lattice workflow


def run_lattice_workflow(
    cfg: WorkflowConfig,
    log_path: str | Path | None = None,
    resume: bool = False,
    stop_after: int | None = None,
) -> dict[str, Any]:
    """Rectangle-granularity staged assessment: c2c filters, then full assessments per branch."""
    if cfg.device.all_to_all:
        raise ConfigError("the lattice workflow needs a device with rectangles")
    eng = _Engine(cfg, log_path, resume, stop_after)
    try:
        return _lattice(cfg, eng)
    finally:
        eng.close()


def _lattice(cfg: WorkflowConfig, eng: _Engine) -> dict[str, Any]:
    rects = {r.index: r for r in partition_rectangles(cfg.device)}
    if not rects:
        raise ConfigError("device has no rectangles")
    universe = list(cfg.rectangles) if cfg.rectangles else sorted(rects)
    protocols = {k.label: dict(NOT_RUN_ENTRY) for k in pr.TABLE_ORDER}

    def assess(kind: ProtocolKind, stages: Sequence[str], entering: Sequence[int]):
        current = list(entering)
        final: list[FidelityEstimate] = []
        for st in stages:
            if not current:
                break
            insts = [pr.lattice_instance(kind, rects[i], p) for i in current for p in enumerate_paths(rects[i], st)]
            _, final = eng.run_stage(kind, st, insts, current, PER_RECTANGLE)
            passing = stage_pass(final, cfg.threshold(kind))
            current = [i for i in current if passing.get(per_rectangle(i), False)]
        return current, final

    def conclude(kind: ProtocolKind, survivors: Sequence[int], final: Sequence[FidelityEstimate]) -> list[int]:
        mins = {e.key.value[0]: e.min for e in final}
        if survivors:
            value = sum(mins[i] for i in survivors) / len(survivors)
            protocols[kind.label] = _entry(PASSED, survivors, value, "avg_min")
        else:
            protocols[kind.label] = _entry(FAILED, metric="avg_min")
        return list(survivors)

    T, D, B = ProtocolKind(pr.TRANSMIT), ProtocolKind(pr.DO_NOTHING), ProtocolKind(pr.BELL)
    surv_t, est_t = assess(T, [C2C], universe)
    if not surv_t:
        conclude(T, [], est_t)
        return eng.report(protocols, terminated_early=True)
    surv_d, est_d = assess(D, [C2C], surv_t)
    if not surv_d:
        conclude(D, [], est_d)
        return eng.report(protocols, terminated_early=True)

    later_stages = [s for s in cfg.stages if s != C2C]

    def full_from_filter(kind: ProtocolKind, est_c2c: Sequence[FidelityEstimate]) -> list[int]:
        if later_stages:
            survivors, final = assess(kind, later_stages, surv_d)
        else:
            survivors, final = list(surv_d), list(est_c2c)
        return conclude(kind, survivors, final)

    final_t = full_from_filter(T, est_t)
    final_d = full_from_filter(D, est_d)

    def branch(kind: ProtocolKind, entering: Sequence[int]) -> list[int]:
        if not cfg.enabled(kind) or not entering:
            return []
        survivors, final = assess(kind, cfg.stages, entering)
        return conclude(kind, survivors, final)

    final_b = branch(B, surv_d)
    gt2 = branch(ProtocolKind(pr.GEN_TRANSMIT, 2), final_t)
    branch(ProtocolKind(pr.GEN_TRANSMIT, 3), gt2)
    gd2 = branch(ProtocolKind(pr.GEN_DO_NOTHING, 2), final_d)
    branch(ProtocolKind(pr.GEN_DO_NOTHING, 3), gd2)
    cat3 = branch(ProtocolKind(pr.CAT, 3, 2), final_b)
    branch(ProtocolKind(pr.CAT, 4, 2), cat3)
    return eng.report(protocols)


def run_workflow(
    cfg: WorkflowConfig,
    log_path: str | Path | None = None,
    resume: bool = False,
    stop_after: int | None = None,
) -> dict[str, Any]:
    runner = run_ion_trap_workflow if cfg.device.all_to_all else run_lattice_workflow
    return runner(cfg, log_path, resume, stop_after)
