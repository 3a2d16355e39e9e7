"""Python access to the spikesift sorter."""

from ._spikesift import (
    Channel,
    Config,
    Error,
    GroundTruth,
    ProbeGeometry,
    Recording,
    SortResult,
    TruthNeuron,
    Unit,
    dog_filter,
    evaluate,
    generate,
    load_config,
    load_recording,
    read_probe,
    read_results,
    read_truth,
    sort,
    write_probe,
    write_results,
    write_signal,
    write_truth,
)

__all__ = [
    "Channel",
    "Config",
    "Error",
    "GroundTruth",
    "ProbeGeometry",
    "Recording",
    "SortResult",
    "TruthNeuron",
    "Unit",
    "dog_filter",
    "evaluate",
    "generate",
    "load_config",
    "load_recording",
    "read_probe",
    "read_results",
    "read_truth",
    "sort",
    "write_probe",
    "write_results",
    "write_signal",
    "write_truth",
]
