"""Structured-unitary IR, the four-factor decomposition, and block-dispatch lowering."""
from .decomposition import (
    DcIdentityReport,
    DecompositionCheck,
    b_factorization_error,
    build_d_matrix,
    build_decomposition,
    check_decomposition,
    decomposition_signed_matrix,
    fit_line_pairs,
    realized_params,
    verify_dc_identity,
)
from .ir import (
    BitHadamard,
    BlockDispatch,
    BMatrix,
    BStage,
    CircuitDescription,
    ControlledFactor,
    DMatrix,
    Factor,
    FieldDFT,
    FieldScalePermutation,
    FieldShiftPermutation,
    GateTableXor,
    Identity,
    IndexTranspose,
    InputPhase,
    PairHadamard,
    TensorLeftIdentity,
    apply_extended,
    materialize,
)
from .lowering import GateCostReport, gate_cost, lower_block_dispatch, lower_circuit, lowering_error

__all__ = [name for name in dir() if not name.startswith("_")]
