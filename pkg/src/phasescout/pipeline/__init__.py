"""Grid sweeps, the ground-state cache, and the unsupervised discovery loop."""

from .discover import (
    UNASSIGNED,
    DiscoveryResult,
    LossMap,
    RegionProposal,
    anomaly_threshold,
    discover_phases,
    evaluate_loss_map,
    hole_study,
    load_cache,
    missing_cells,
    origin_block,
    propose_region,
    supersolid_probe,
    train_region,
)
from .inputs import INPUT_KINDS, extract_input, input_shape
from .reports import (
    build_report,
    format_float,
    write_fidelity_csv,
    write_labels_csv,
    write_loss_map_csv,
    write_observables_csv,
    write_pgm,
)
from .records import (
    GroundStateRecord,
    ManifestEntry,
    cell_filename,
    file_checksum,
    load_manifest,
    load_record,
    record_from_result,
    write_manifest,
    write_record,
)
from .sweep import SweepGrid, sweep_groundstates

__all__ = [
    "INPUT_KINDS",
    "UNASSIGNED",
    "DiscoveryResult",
    "GroundStateRecord",
    "LossMap",
    "ManifestEntry",
    "RegionProposal",
    "SweepGrid",
    "anomaly_threshold",
    "build_report",
    "cell_filename",
    "origin_block",
    "discover_phases",
    "format_float",
    "evaluate_loss_map",
    "extract_input",
    "file_checksum",
    "hole_study",
    "input_shape",
    "load_cache",
    "load_manifest",
    "load_record",
    "missing_cells",
    "propose_region",
    "record_from_result",
    "supersolid_probe",
    "sweep_groundstates",
    "train_region",
    "write_fidelity_csv",
    "write_labels_csv",
    "write_loss_map_csv",
    "write_manifest",
    "write_observables_csv",
    "write_pgm",
    "write_record",
]
