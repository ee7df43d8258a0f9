"""Write the two hand-specified lattice sample reports used by the comparison-table tests.

These reports are not produced by a run. They carry only the fields the table
and report loaders read, with protocol outcomes fixed by hand: passed entries
with their surviving rectangles and value, failed entries, and protocols that
never ran.
"""

from pathlib import Path

from quantumness import protocols as pr
from quantumness.reporting import CONVENTIONS, SCHEMA_VERSION, write_report

OUT = Path(__file__).resolve().parents[1] / "src" / "quantumness" / "data" / "samples"


def passed(subchip, value):
    return {"status": "passed", "subchip": list(subchip), "value": value, "metric": "avg_min"}


FAILED = {"status": "failed", "subchip": [], "value": None, "metric": "avg_min"}
NOT_RUN = {"status": "not_run", "subchip": [], "value": None, "metric": "min"}


EAGLE = {
    "transmit": passed([3, 7, 8, 9, 10, 11, 16], 0.806),
    "gen_transmit_m2": FAILED,
    "do_nothing": passed([3, 7, 8, 9, 10], 0.745),
}


HERON_CORE = [1, 4, 8, 11, 13, 15, 16, 19, 20, 21]
HERON = {
    "transmit": passed(HERON_CORE, 0.82),
    "gen_transmit_m2": FAILED,
    "do_nothing": passed(HERON_CORE, 0.785),
    "gen_do_nothing_m2": passed(HERON_CORE, 0.654),
    "gen_do_nothing_m3": passed(HERON_CORE, 0.533),
    "bell": passed([1, 4, 8, 11, 13, 15, 16, 19, 21], 0.696),
    "cat_m3_j2": passed([1, 11, 13, 15, 16, 19, 21], 0.681),
    "cat_m4_j2": FAILED,
}


def report(device: str, stamp: str, outcomes: dict) -> dict:
    protocols = {k.label: dict(outcomes.get(k.label, NOT_RUN)) for k in pr.TABLE_ORDER}
    passed_sets = [set(v["subchip"]) for v in protocols.values() if v["status"] == "passed"]
    return {
        "schema_version": SCHEMA_VERSION,
        "run_id": f"{device}-sample",
        "device": device,
        "device_kind": "lattice",
        "backend": "recorded",
        "seed": 0,
        "shots": 1000,
        "config_hash": "sample",
        "timestamp": stamp,
        "conventions": CONVENTIONS,
        "thresholds": {k.label: float(pr.threshold_for(k)) for k in pr.TABLE_ORDER},
        "stages": [],
        "protocols": protocols,
        "optimal_subchip": {
            "all_protocols": sorted(set.intersection(*passed_sets)),
            "per_protocol": {k: v["subchip"] for k, v in protocols.items() if v["status"] == "passed"},
        },
        "terminated_early": False,
    }


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for device, stamp, outcomes in (
        ("eagle-like", "2025-08-22T09:00:00Z", EAGLE),
        ("heron-like", "2025-11-29T09:00:00Z", HERON),
    ):
        path = OUT / f"{device}-report.json"
        write_report(report(device, stamp, outcomes), path)
        print(path)


if __name__ == "__main__":
    main()
