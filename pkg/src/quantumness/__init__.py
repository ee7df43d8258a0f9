"""Protocol-based quantumness benchmarking for all-to-all and heavy-hex devices."""

from .circuit import Circuit, CircuitError, Gate, append_gate, remap_to_compact, swap_decompose
from .protocols import ProtocolKind, Setting, threshold_for
from .simulator import CountsTable, ExecutionRequest, NoiseModel, density_oracle, execute_batch
from .topology import DeviceTopology, QubitPath, Rectangle, enumerate_paths, load_device, partition_rectangles

__version__ = "0.1.0"

__all__ = [
    "Circuit",
    "CircuitError",
    "CountsTable",
    "DeviceTopology",
    "ExecutionRequest",
    "Gate",
    "NoiseModel",
    "ProtocolKind",
    "QubitPath",
    "Rectangle",
    "Setting",
    "append_gate",
    "density_oracle",
    "enumerate_paths",
    "execute_batch",
    "load_device",
    "partition_rectangles",
    "remap_to_compact",
    "swap_decompose",
    "threshold_for",
]
