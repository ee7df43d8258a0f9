"""Regenerate the shipped device descriptors under src/quantumness/data/devices."""

import json
from pathlib import Path

from quantumness.topology import all_to_all_descriptor, eagle_descriptor, heron_descriptor

OUT = Path(__file__).resolve().parents[1] / "src" / "quantumness" / "data" / "devices"

SYNTHETIC = "synthetic illustrative values, not calibration data of any real device"

NOISE = {
    "ibex-like": {"p1": 0.001, "p2": 0.01, "readout": 0.005},
    "eagle-like": {"p1": 0.0005, "p2": 0.008, "readout": 0.015},
    "heron-like": {"p1": 0.0003, "p2": 0.004, "readout": 0.01},
}


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for desc in (all_to_all_descriptor(), eagle_descriptor(), heron_descriptor()):
        desc["noise"] = dict(NOISE[desc["name"]], synthetic=True, note=SYNTHETIC)
        path = OUT / f"{desc['name']}.json"
        path.write_text(json.dumps(desc, indent=1, sort_keys=True) + "\n")
        print(path)


if __name__ == "__main__":
    main()
