"""Regenerate the scripted ibex-like replay log, its config, and the report it produces.

Counts are written by rule, not sampled, so every fidelity in the log is an exact
fraction. The rules are chosen so the workflow outcome is known in advance:

* qubits 0, 5, 8, 11 receive badly in transmit and lose state in do-nothing,
  so they are the four excluded qubits;
* on the reduced chip, transmit bottoms out at 0.75 and do-nothing at 0.703;
* Bell records touching 4, 6 or 10 fall below 1/2, so the greedy search ends on
  {1, 2, 3, 7, 9} with a record sitting exactly on the threshold;
* every generalized record is below its threshold.
"""

import json
from pathlib import Path

from quantumness import protocols as pr
from quantumness.reporting import CONVENTIONS, make_manifest, write_results, write_report
from quantumness.workflow import config_from_dict, run_workflow

OUT = Path(__file__).resolve().parents[1] / "src" / "quantumness" / "data" / "samples"
LOG = "ibex-like-recorded.jsonl"
CONFIG = "ibex-like-replay.json"
REPORT = "ibex-like-report.json"

SHOTS = 1000
STAMP = "2025-08-25T09:00:00Z"
BAD = {0, 5, 8, 11}
QUBITS = range(12)
REDUCED = [q for q in QUBITS if q not in BAD]
MAX_ALICE = 3
BELL_FINAL = {1, 2, 3, 7, 9}
# Bell: correlator XX for records touching a weak qubit, first match wins
BELL_WEAK = ((4, 0.2), (6, 0.4), (10, 0.6))
GEN_SUCCESS = {2: 300, 3: 200}


def complement(bits: str) -> str:
    return "".join("1" if b == "0" else "0" for b in bits)


def transfer_counts(setting: pr.Setting, success: int) -> dict[str, int]:
    want = setting.expected_bits
    return {want: success, complement(want): SHOTS - success}


def parity_counts(odd: int) -> dict[str, int]:
    even = SHOTS - odd
    return {"00": even - even // 2, "11": even // 2, "01": odd - odd // 2, "10": odd // 2}


def single_success(kind: pr.ProtocolKind, a: int, b: int) -> int:
    if kind.name == pr.TRANSMIT:
        if b in BAD:
            return 550
        return 750 if (a, b) == (3, 7) else 800 + 10 * ((7 * a + 3 * b) % 10)
    if a in BAD:
        return 500
    return 703 if (a, b) == (6, 2) else 800 + 10 * ((5 * a + b) % 10)


def bell_correlators(inst: pr.ProtocolInstance) -> tuple[float, float, float]:
    """(XX, -YY, ZZ) correlators; fidelity is (1 + sum) / 4."""
    for q, xx in BELL_WEAK:
        if q in inst.touched:
            return xx, 0.0, 0.0
    if inst.touched <= BELL_FINAL and inst.bob == (7, 9):
        return 0.5, 0.5, 0.0
    return 0.6, 0.6, 0.6


def counts_for(inst: pr.ProtocolInstance, setting: pr.Setting) -> dict[str, int]:
    kind = inst.kind
    if kind.name in (pr.TRANSMIT, pr.DO_NOTHING):
        a, b = inst.paths[0].qubits
        return transfer_counts(setting, single_success(kind, a, b))
    if kind.name == pr.BELL:
        xx, myy, zz = bell_correlators(inst)
        corr = {"XX": xx, "YY": -myy, "ZZ": zz}[setting.label]
        return parity_counts(round((1 - corr) / 2 * SHOTS))
    return transfer_counts(setting, GEN_SUCCESS[kind.m])


def records_for(kind: pr.ProtocolKind, instances) -> list[dict]:
    out = []
    for inst in instances:
        for setting in pr.settings_for(kind):
            out.append(
                {
                    "run_id": "ibex-like-scripted",
                    "device": "ibex-like",
                    "protocol": kind.label,
                    "params": kind.params,
                    "stage": "AL",
                    "path": list(inst.paths[0].qubits),
                    "paths": [list(p.qubits) for p in inst.paths],
                    "rectangle": None,
                    "setting": setting.label,
                    "shots": SHOTS,
                    "counts": counts_for(inst, setting),
                    "timestamp": STAMP,
                    "backend": "recorded",
                    "seed": None,
                    "take": 1,
                }
            )
    return out


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    records = []
    for kind in pr.TABLE_ORDER:
        if kind.name == pr.CAT:
            continue
        if kind.name in (pr.TRANSMIT, pr.DO_NOTHING):
            insts = pr.all_to_all_instances(kind, QUBITS)
        else:
            insts = pr.all_to_all_instances(kind, REDUCED, MAX_ALICE)
        records += records_for(kind, insts)
    manifest = make_manifest("ibex-like-scripted", "ibex-like", "recorded", 0, "scripted", STAMP, CONVENTIONS)
    write_results(records, manifest, OUT / LOG)

    config = {
        "device": "ibex-like",
        "backend": "replay",
        "replay_log": LOG,
        "shots": SHOTS,
        "k": 4,
        "max_alice_camps": MAX_ALICE,
        "timestamp": STAMP,
    }
    (OUT / CONFIG).write_text(json.dumps(config, indent=1, sort_keys=True) + "\n")
    report = run_workflow(config_from_dict(config, OUT))
    write_report(report, OUT / REPORT)
    for label, entry in report["protocols"].items():
        print(f"{label:<20} {entry['status']:<8} {entry['subchip']} {entry['value']}")
    print(f"{len(records)} records, excluded {report['excluded']}")


if __name__ == "__main__":
    main()
