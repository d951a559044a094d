"""Complexity estimation from exhaustive Turing machine censuses.

The package enumerates every binary machine of a small universe, turns
the halting statistics into algorithmic-probability complexity estimates
(with block decomposition for longer strings), and cross-validates the
whole construction against a reversible-circuit simulation that evolves
all programs in superposition.
"""

__version__ = "0.1.0"

from .census import (
    FrequencyDistribution,
    enumerate_machines,
    enumerate_range,
    merge,
    shard_plan,
)
from .complexity import (
    BdmResult,
    CtmTable,
    DecayFit,
    NotInTableError,
    bdm,
    bdm_detail,
    build_table,
    ctm,
    d_value,
    entropy,
    fit_decay,
)
from .estimators import BdmEstimator, CtmEstimator, QuantumCtmEstimator
from .machine import (
    MachineConfig,
    MachineSpec,
    RunOutcome,
    RunStatus,
    TransitionRule,
    TransitionTable,
    count_programs,
    decode_program,
    encode_program,
    run,
    run_table,
    step,
)
from .qsim import (
    MeasurementReport,
    PermutationEnsemble,
    RegisterLayout,
    StateVectorSim,
    build_layout,
    compare_backends,
    measure,
    prepare_initial,
    reset_step,
    run_staged,
    tm_step,
    trace_program,
)
from .resources import ResourceEstimate, estimate, growth_csv, growth_rows, qubit_count
from .store import (
    Checkpoint,
    StoreError,
    append_checkpoint_shard,
    export_table_jsonl,
    load_checkpoint,
    load_table,
    save_checkpoint,
    save_table,
    spec_key,
)
from .validation import as_bit_string, as_bit_strings

__all__ = [
    "BdmEstimator",
    "BdmResult",
    "Checkpoint",
    "CtmEstimator",
    "CtmTable",
    "DecayFit",
    "FrequencyDistribution",
    "MachineConfig",
    "MachineSpec",
    "MeasurementReport",
    "NotInTableError",
    "PermutationEnsemble",
    "QuantumCtmEstimator",
    "RegisterLayout",
    "ResourceEstimate",
    "RunOutcome",
    "RunStatus",
    "StateVectorSim",
    "StoreError",
    "TransitionRule",
    "TransitionTable",
    "append_checkpoint_shard",
    "as_bit_string",
    "as_bit_strings",
    "bdm",
    "bdm_detail",
    "build_layout",
    "build_table",
    "compare_backends",
    "count_programs",
    "ctm",
    "d_value",
    "decode_program",
    "encode_program",
    "entropy",
    "enumerate_machines",
    "enumerate_range",
    "estimate",
    "export_table_jsonl",
    "fit_decay",
    "growth_csv",
    "growth_rows",
    "load_checkpoint",
    "load_table",
    "measure",
    "merge",
    "prepare_initial",
    "qubit_count",
    "reset_step",
    "run",
    "run_staged",
    "run_table",
    "save_checkpoint",
    "save_table",
    "shard_plan",
    "spec_key",
    "step",
    "tm_step",
    "trace_program",
]
