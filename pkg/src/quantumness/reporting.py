"""Results log I/O, the cross-device comparison table and SVG bar charts."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from html import escape
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .fidelity import rows_csv
from .protocols import TABLE_ORDER

SCHEMA_VERSION = 1

PASSED, FAILED, NOT_RUN = "passed", "failed", "not_run"

CONVENTIONS = {
    "transfer_ensemble": "six axial states (Z+, Z-, X+, X-, Y+, Y-), Latin design over work qubits",
    "bell_state": "phi+",
    "bell_estimator": "(1 + <XX> - <YY> + <ZZ>) / 4",
    "ghz_estimator": "(P(0..0) + P(1..1)) / 2 + |sum_k (-1)^k <parity(k pi / M)>| / (2 M)",
    "threshold_comparison": "min >= threshold",
}


class ResultsError(ValueError):
    pass


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def make_manifest(
    run_id: str,
    device: str,
    backend: str,
    seed: int,
    config_hash: str,
    timestamp: str,
    conventions: Mapping[str, str] | None = None,
) -> dict[str, Any]:
    return {
        "type": "manifest",
        "schema_version": SCHEMA_VERSION,
        "run_id": run_id,
        "device": device,
        "backend": backend,
        "seed": seed,
        "config_hash": config_hash,
        "timestamp": timestamp,
        "conventions": dict(conventions or CONVENTIONS),
    }


def write_results(records: Iterable[Mapping[str, Any]], manifest: Mapping[str, Any], path: str | Path) -> None:
    """Write a JSONL log: the manifest line, then one line per circuit record."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dumps(dict(manifest)) + "\n")
        for r in records:
            fh.write(_dumps(dict(r)) + "\n")


class ResultsLog:
    """Append-only JSONL writer used while a workflow runs."""

    def __init__(self, path: str | Path, manifest: Mapping[str, Any]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8")
        self._fh.write(_dumps(dict(manifest)) + "\n")
        self._fh.flush()

    def append(self, records: Iterable[Mapping[str, Any]]) -> None:
        for r in records:
            self._fh.write(_dumps(dict(r)) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "ResultsLog":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()


def load_results(path: str | Path) -> tuple[list[dict[str, Any]], dict[str, Any]]:
    """Read a JSONL log back. Extra manifest lines from concatenated logs are allowed."""
    records: list[dict[str, Any]] = []
    manifest: dict[str, Any] | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ResultsError(f"{path}: corrupt line {lineno}: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise ResultsError(f"{path}: corrupt line {lineno}: expected an object")
            if obj.get("type") == "manifest":
                version = obj.get("schema_version")
                if version != SCHEMA_VERSION:
                    raise ResultsError(
                        f"{path}: schema version {version} is not supported (expected {SCHEMA_VERSION})"
                    )
                if manifest is None:
                    manifest = obj
                continue
            if manifest is None:
                raise ResultsError(f"{path}: line {lineno} precedes the manifest")
            records.append(obj)
    if manifest is None:
        raise ResultsError(f"{path}: no manifest line")
    return records, manifest


# ---------------------------------------------------------------------------
# Comparison table

PROTOCOL_TITLES = {
    "transmit": "Transmit",
    "gen_transmit_m2": "Generalized transmit M=2",
    "gen_transmit_m3": "Generalized transmit M=3",
    "do_nothing": "Do-nothing",
    "gen_do_nothing_m2": "Generalized do-nothing M=2",
    "gen_do_nothing_m3": "Generalized do-nothing M=3",
    "bell": "Bell-state transfer",
    "cat_m3_j2": "Cat state J=2,M=3",
    "cat_m4_j2": "Cat state J=2,M=4",
}

METRIC_MIN, METRIC_AVG_MIN = "min", "avg_min"


def format_value(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


@dataclass(frozen=True)
class Cell:
    status: str
    size: int | None = None
    value: float | None = None

    def texts(self) -> tuple[str, str]:
        if self.status == NOT_RUN:
            return "", ""
        if self.status == FAILED:
            return "-", "-"
        return str(self.size), format_value(self.value)


def _cell(report: Mapping[str, Any], label: str) -> Cell:
    entry = report.get("protocols", {}).get(label)
    if entry is None or entry["status"] == NOT_RUN:
        return Cell(NOT_RUN)
    if entry["status"] == FAILED:
        return Cell(FAILED)
    return Cell(PASSED, len(entry["subchip"]), float(entry["value"]))


def _metric(report: Mapping[str, Any]) -> str:
    return METRIC_MIN if report.get("device_kind") == "all_to_all" else METRIC_AVG_MIN


def latest_per_device(reports: Sequence[Mapping[str, Any]]) -> tuple[list[Mapping[str, Any]], list[str]]:
    """One report per device; on conflicting run ids the latest timestamp wins."""
    chosen: dict[str, Mapping[str, Any]] = {}
    order: list[str] = []
    warnings: list[str] = []
    for r in reports:
        dev = r["device"]
        if dev not in chosen:
            chosen[dev] = r
            order.append(dev)
            continue
        prev = chosen[dev]
        if prev.get("run_id") != r.get("run_id"):
            warnings.append(f"conflicting run ids for device {dev}: {prev.get('run_id')} vs {r.get('run_id')}")
        if str(r.get("timestamp", "")) >= str(prev.get("timestamp", "")):
            chosen[dev] = r
    return [chosen[d] for d in order], warnings


def emit_comparison_table(reports: Sequence[Mapping[str, Any]], fmt: str = "csv") -> str:
    """Render the per-protocol comparison across devices as CSV or Markdown."""
    if not reports:
        raise ResultsError("at least one report is required")
    labels = [k.label for k in TABLE_ORDER]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["protocol", "device", "metric_kind", "subchip", "value", "status"])
        for label in labels:
            for r in reports:
                c = _cell(r, label)
                size, value = c.texts()
                w.writerow([label, r["device"], _metric(r), size, value, c.status])
        return buf.getvalue()
    if fmt in ("md", "markdown"):
        head = ["Protocol"]
        for r in reports:
            if _metric(r) == METRIC_MIN:
                head += [f"{r['device']} Sub-Chip Size", f"{r['device']} Min F."]
            else:
                head += [f"{r['device']} Sub-Chips", f"{r['device']} Avg Min F."]
        lines = ["| " + " | ".join(head) + " |", "|" + "|".join(["---"] * len(head)) + "|"]
        for label in labels:
            row = [PROTOCOL_TITLES[label]]
            for r in reports:
                row += list(_cell(r, label).texts())
            lines.append("| " + " | ".join(row) + " |")
        return "\n".join(lines) + "\n"
    raise ResultsError(f"unknown table format {fmt!r}")


# ---------------------------------------------------------------------------
# Charts


def _row(e: Any) -> tuple[str, float, float, float]:
    if isinstance(e, Mapping):
        return str(e["key"]), float(e["mean"]), float(e["min"]), float(e["max"])
    return str(e.key), float(e.mean), float(e.min), float(e.max)


def render_chart(estimates: Sequence[Any], threshold: float, title: str = "") -> str:
    """SVG bar chart: mean bars, min/max whiskers, dashed threshold line."""
    rows = [_row(e) for e in estimates]
    if not rows:
        raise ResultsError("cannot chart an empty estimate list")
    width, height = 60 + 36 * len(rows) + 30, 320
    left, top, bottom = 60, 40, 60
    plot_h = height - top - bottom

    def y(v: float) -> float:
        return top + plot_h * (1.0 - min(1.0, max(0.0, v)))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{width / 2:.1f}" y="22" font-size="14" text-anchor="middle">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="#000"/>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{width - 20}" y2="{top + plot_h}" stroke="#000"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(
            f'<text x="{left - 6}" y="{y(tick) + 4:.1f}" font-size="10" text-anchor="end">{tick:.2f}</text>'
        )
    for i, (key, mean, lo, hi) in enumerate(rows):
        x = left + 8 + 36 * i
        cx = x + 12
        parts.append(
            f'<rect class="bar" x="{x}" y="{y(mean):.2f}" width="24" height="{top + plot_h - y(mean):.2f}" fill="#4c78a8"/>'
        )
        parts.append(f'<line class="whisker" x1="{cx}" y1="{y(hi):.2f}" x2="{cx}" y2="{y(lo):.2f}" stroke="#222"/>')
        parts.append(f'<line x1="{cx - 5}" y1="{y(hi):.2f}" x2="{cx + 5}" y2="{y(hi):.2f}" stroke="#222"/>')
        parts.append(f'<line x1="{cx - 5}" y1="{y(lo):.2f}" x2="{cx + 5}" y2="{y(lo):.2f}" stroke="#222"/>')
        parts.append(
            f'<text x="{cx}" y="{top + plot_h + 14}" font-size="9" text-anchor="middle">{escape(key)}</text>'
        )
    parts.append(
        f'<line class="threshold" x1="{left}" y1="{y(threshold):.2f}" x2="{width - 20}" y2="{y(threshold):.2f}" '
        f'stroke="#d62728" stroke-dasharray="6,3"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def chart_name(run_id: str, protocol: str, stage: str, take: int = 1) -> str:
    suffix = f"_take{take}" if take != 1 else ""
    return f"{run_id}_{protocol}_{stage}{suffix}.svg"


def emit_charts(report: Mapping[str, Any], out_dir: str | Path) -> list[Path]:
    """Write one chart per executed stage of ``report``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for st in report.get("stages", []):
        if not st.get("estimates"):
            continue
        path = out / chart_name(report["run_id"], st["protocol"], st["stage"], st.get("take", 1))
        title = f"{report['device']} {st['protocol']} {st['stage']}"
        path.write_text(render_chart(st["estimates"], st["threshold"], title), encoding="utf-8")
        written.append(path)
    return written


def write_report(report: Mapping[str, Any], path: str | Path) -> None:
    Path(path).write_text(json.dumps(report, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_report(path: str | Path) -> dict[str, Any]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ResultsError(f"{path}: report schema version {version} is not supported (expected {SCHEMA_VERSION})")
    return data


def emit_estimate_tables(report: Mapping[str, Any], out_dir: str | Path) -> list[Path]:
    """Write one estimates CSV per executed stage of ``report``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for st in report.get("stages", []):
        if not st.get("estimates"):
            continue
        name = chart_name(report["run_id"], st["protocol"], st["stage"], st.get("take", 1))[:-4] + ".csv"
        path = out / name
        path.write_text(rows_csv(st["estimates"]), encoding="utf-8")
        written.append(path)
    return written
