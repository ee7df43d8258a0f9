"""Counts to fidelities, grouping into per-qubit / per-camp / per-rectangle estimates, thresholds."""

from __future__ import annotations

import csv
import io
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .protocols import BELL, CAT, ProtocolKind, Setting, settings_for
from .simulator import CountsTable

PASS_ATOL = 1e-12

PER_QUBIT, PER_CAMP, PER_RECTANGLE = "qubit", "camp", "rectangle"
KEYINGS = (PER_QUBIT, PER_CAMP, PER_RECTANGLE)


class FidelityError(ValueError):
    pass


class ClampWarning(UserWarning):
    """An estimator's raw value fell outside [0, 1] and was clamped."""


def _clamp(value: float, what: str) -> float:
    if value < 0.0 or value > 1.0:
        warnings.warn(f"{what} estimate {value:.6f} clamped to [0, 1]", ClampWarning, stacklevel=3)
        return min(1.0, max(0.0, value))
    return value


# Estimators accept sampled counts or exact outcome distributions {bits: probability}.
Outcomes = CountsTable | Mapping[str, float]


def _probs(x: Outcomes) -> dict[str, float]:
    if isinstance(x, CountsTable):
        return {k: n / x.shots for k, n in x.counts.items()}
    return dict(x)


def _shots(x: Outcomes) -> float:
    return x.shots if isinstance(x, CountsTable) else math.inf


def _width(x: Outcomes) -> int:
    return len(next(iter(_probs(x)), ""))


def _parity_expectation(x: Outcomes) -> float:
    odd = sum(p for bits, p in _probs(x).items() if bits.count("1") % 2)
    return 1.0 - 2.0 * odd


def _expectation_var(e: float, shots: float) -> float:
    return max(0.0, 1.0 - e * e) / shots


def estimate_state_fidelity(counts: Outcomes, setting: Setting) -> float:
    """Fraction of shots where every measured bit matches the prepared eigenstate."""
    want = setting.expected_bits
    if _width(counts) != len(want):
        raise FidelityError(f"counts have {_width(counts)} bits, setting prepares {len(want)} qubits")
    if isinstance(counts, CountsTable) and counts.shots == 0:
        raise FidelityError("no shots")
    return _probs(counts).get(want, 0.0)


def _require(counts: Mapping[str, Outcomes], labels: Iterable[str], what: str) -> None:
    missing = [s for s in labels if s not in counts]
    if missing:
        raise FidelityError(f"{what} estimator is missing setting(s) {missing}")


def estimate_bell_fidelity(counts: Mapping[str, Outcomes]) -> float:
    """Phi+ fidelity from the XX, YY, ZZ correlators."""
    _require(counts, ("XX", "YY", "ZZ"), "Bell")
    xx, yy, zz = (_parity_expectation(counts[b]) for b in ("XX", "YY", "ZZ"))
    return _clamp((1.0 + xx - yy + zz) / 4.0, "Bell")


def _bell_stderr(counts: Mapping[str, Outcomes]) -> float:
    var = sum(_expectation_var(_parity_expectation(counts[b]), _shots(counts[b])) for b in ("XX", "YY", "ZZ"))
    return math.sqrt(var) / 4.0


def _ghz_terms(counts: Mapping[str, Outcomes], m: int) -> tuple[float, float, float]:
    labels = ["pop"] + [f"par{k}" for k in range(m)]
    _require(counts, labels, "GHZ")
    pop = _probs(counts["pop"])
    if _width(counts["pop"]) != m:
        raise FidelityError(f"population counts have {_width(counts['pop'])} bits, expected {m}")
    p = pop.get("0" * m, 0.0) + pop.get("1" * m, 0.0)
    parities = [_parity_expectation(counts[f"par{k}"]) for k in range(m)]
    coherence = abs(sum((-1) ** k * e for k, e in enumerate(parities))) / m
    var = p * (1 - p) / _shots(counts["pop"]) / 4.0
    var += sum(_expectation_var(e, _shots(counts[f"par{k}"])) for k, e in enumerate(parities)) / (m * m) / 4.0
    return p, coherence, math.sqrt(var)


def estimate_ghz_fidelity(counts: Mapping[str, Outcomes], m: int) -> float:
    """GHZ fidelity from the population setting plus M parity settings."""
    p, coherence, _ = _ghz_terms(counts, m)
    return _clamp(p / 2.0 + coherence / 2.0, "GHZ")


def instance_fidelity(kind: ProtocolKind, counts: Mapping[str, Outcomes]) -> tuple[float, float]:
    """(fidelity, shot-noise stderr) of one protocol instance from its per-setting counts."""
    if kind.name == BELL:
        return estimate_bell_fidelity(counts), _bell_stderr(counts)
    if kind.name == CAT:
        p, c, se = _ghz_terms(counts, kind.m)
        return _clamp(p / 2.0 + c / 2.0, "GHZ"), se
    settings = settings_for(kind)
    _require(counts, [s.label for s in settings], kind.label)
    values, var = [], 0.0
    for s in settings:
        f = estimate_state_fidelity(counts[s.label], s)
        values.append(f)
        var += f * (1.0 - f) / _shots(counts[s.label])
    return sum(values) / len(values), math.sqrt(var) / len(values)


@dataclass(frozen=True)
class FidelityRecord:
    """Fidelity of one protocol instance (one routing, all settings combined)."""

    protocol: str
    stage: str
    camp: tuple[int, ...]
    qubits: frozenset[int]
    fidelity: float
    stderr: float = 0.0
    rectangle: int | None = None
    paths: tuple[tuple[int, ...], ...] = ()
    take: int = 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "protocol": self.protocol,
            "stage": self.stage,
            "camp": list(self.camp),
            "qubits": sorted(self.qubits),
            "fidelity": self.fidelity,
            "stderr": self.stderr,
            "rectangle": self.rectangle,
            "paths": [list(p) for p in self.paths],
            "take": self.take,
        }


@dataclass(frozen=True, order=True)
class AggregationKey:
    kind: str
    value: tuple[int, ...] = field(default=())

    def __str__(self) -> str:
        if self.kind == PER_QUBIT:
            return f"q{self.value[0]}"
        if self.kind == PER_RECTANGLE:
            return f"rect{self.value[0]}"
        return "camp(" + ",".join(map(str, self.value)) + ")"


def per_qubit(q: int) -> AggregationKey:
    return AggregationKey(PER_QUBIT, (int(q),))


def per_camp(qubits: Iterable[int]) -> AggregationKey:
    return AggregationKey(PER_CAMP, tuple(sorted(int(q) for q in qubits)))


def per_rectangle(index: int) -> AggregationKey:
    return AggregationKey(PER_RECTANGLE, (int(index),))


@dataclass(frozen=True)
class FidelityEstimate:
    key: AggregationKey
    mean: float
    min: float
    max: float
    stderr: float
    n_circuits: int

    def passes(self, threshold: float) -> bool:
        return self.min >= threshold - PASS_ATOL


def _keys_of(record: FidelityRecord, keying: str) -> list[AggregationKey]:
    if keying == PER_QUBIT:
        return [per_qubit(q) for q in record.camp]
    if keying == PER_CAMP:
        return [per_camp(record.camp)]
    if keying == PER_RECTANGLE:
        if record.rectangle is None:
            raise FidelityError("record has no rectangle index")
        return [per_rectangle(record.rectangle)]
    raise FidelityError(f"unknown keying {keying!r}")


def aggregate(records: Iterable[FidelityRecord], keying: str) -> list[FidelityEstimate]:
    """Group records by ``keying`` and summarize each group, ordered by key."""
    groups: dict[AggregationKey, list[FidelityRecord]] = defaultdict(list)
    for r in records:
        for k in _keys_of(r, keying):
            groups[k].append(r)
    if not groups:
        raise FidelityError("no records to aggregate")
    out = []
    for key in sorted(groups):
        rs = groups[key]
        # sort so float summation does not depend on input order
        vals = sorted(r.fidelity for r in rs)
        ses = sorted(r.stderr for r in rs)
        out.append(
            FidelityEstimate(
                key=key,
                mean=math.fsum(vals) / len(vals),
                min=vals[0],
                max=vals[-1],
                stderr=math.sqrt(math.fsum(s * s for s in ses)) / len(ses),
                n_circuits=len(rs),
            )
        )
    return out


def stage_pass(estimates: Iterable[FidelityEstimate], threshold: float) -> dict[AggregationKey, bool]:
    """Pass iff the group minimum reaches the threshold (inclusive)."""
    return {e.key: e.passes(threshold) for e in estimates}


def estimate_row(e: FidelityEstimate, threshold: float) -> dict[str, Any]:
    return {
        "key": str(e.key),
        "mean": e.mean,
        "min": e.min,
        "max": e.max,
        "stderr": e.stderr,
        "n": e.n_circuits,
        "pass": e.passes(threshold),
    }


def rows_csv(rows: Iterable[Mapping[str, Any]]) -> str:
    """CSV with columns key, mean, min, max, stderr, n, pass."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "mean", "min", "max", "stderr", "n", "pass"])
    for r in rows:
        w.writerow(
            [r["key"]] + [f"{r[c]:.6f}" for c in ("mean", "min", "max", "stderr")]
            + [r["n"], "pass" if r["pass"] else "fail"]
        )
    return buf.getvalue()


def estimates_csv(estimates: Sequence[FidelityEstimate], threshold: float) -> str:
    return rows_csv(estimate_row(e, threshold) for e in estimates)
