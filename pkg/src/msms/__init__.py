"""Memory Safe Management System: a protected memory store simulator.

A reference-monitor-style store keeps data, integrity checks, priority
flags, and a tamper-evident audit log in isolated zones.  Integrity
checking is selective: only operations flagged as priority pay for
error detection under the enhanced strategy, trading a small blind spot
for most of the unprotected system's speed.  The package also models
the attacks such a store defends against (stochastic bit flips and
dedup-then-hammer targeted flips) and ships the overhead/detection
experiment plus the closed-form cost model.
"""

from ._version import __version__
from .codecs import (
    BergerCodec,
    Codec,
    CodecCheck,
    CodecId,
    CodecMismatchError,
    CostDescriptor,
    DuplicationCodec,
    NullCodec,
    ParityCodec,
    VerifyResult,
    berger_encode,
    berger_verify,
    codec_cost,
    codec_names,
    duplication_encode,
    duplication_verify,
    get_codec,
    parity_encode,
    parity_verify,
    register_codec,
    single_flip_error_sets,
)
from .faults import (
    DEFAULT_ERROR_PROBABILITY,
    DEFAULT_N_OPS,
    ERROR_COUNT_TOLERANCE,
    EXPECTED_ERROR_COUNT,
    ScenarioOutcome,
    SoftErrorModel,
    TargetedFlip,
    flip_feng_shui_scenario,
    rowhammer_flip,
)
from .simulation import (
    CSV_HEADER,
    ComplexityAuditResult,
    CostModelResult,
    CostModelRow,
    OperationRecord,
    RecordSet,
    SimulationConfig,
    SimulationReport,
    Totals,
    baseline_steps,
    complexity_audit,
    draw_plan,
    run_comparison,
    run_simulation,
    step_cost,
    theoretical_cost,
)
from .store import (
    Address,
    AuditEntry,
    AuditEvent,
    AuditLog,
    CheckZoneSealedError,
    MergeReport,
    MissingAddressError,
    MonotonicityError,
    ProtectedStore,
    ReadPolicy,
    ReadResult,
    Strategy,
    Validity,
    verify_entry_dicts,
)
from .words import MAX_WIDTH, RandomSource, Word, flip_bit, hamming_distance

__all__ = [
    "__version__",
    "MAX_WIDTH",
    "Word",
    "flip_bit",
    "hamming_distance",
    "RandomSource",
    "CodecId",
    "CodecCheck",
    "VerifyResult",
    "CostDescriptor",
    "Codec",
    "ParityCodec",
    "BergerCodec",
    "DuplicationCodec",
    "NullCodec",
    "CodecMismatchError",
    "register_codec",
    "get_codec",
    "codec_names",
    "parity_encode",
    "parity_verify",
    "berger_encode",
    "berger_verify",
    "duplication_encode",
    "duplication_verify",
    "single_flip_error_sets",
    "codec_cost",
    "Address",
    "Strategy",
    "ReadPolicy",
    "Validity",
    "AuditEvent",
    "AuditEntry",
    "AuditLog",
    "verify_entry_dicts",
    "MergeReport",
    "ReadResult",
    "ProtectedStore",
    "MissingAddressError",
    "MonotonicityError",
    "CheckZoneSealedError",
    "DEFAULT_N_OPS",
    "DEFAULT_ERROR_PROBABILITY",
    "EXPECTED_ERROR_COUNT",
    "ERROR_COUNT_TOLERANCE",
    "SoftErrorModel",
    "TargetedFlip",
    "rowhammer_flip",
    "ScenarioOutcome",
    "flip_feng_shui_scenario",
    "CSV_HEADER",
    "SimulationConfig",
    "OperationRecord",
    "RecordSet",
    "Totals",
    "SimulationReport",
    "baseline_steps",
    "step_cost",
    "draw_plan",
    "run_simulation",
    "run_comparison",
    "CostModelRow",
    "CostModelResult",
    "theoretical_cost",
    "ComplexityAuditResult",
    "complexity_audit",
]
