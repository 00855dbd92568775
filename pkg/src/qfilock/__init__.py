"""qfilock: statevector experiments and exact Haar-average theory for
quantum Fisher information retention under scrambling and particle loss."""

from .statevec import (
    Bipartition,
    CMatrix,
    DensityMatrix,
    PureState,
    apply_cx,
    apply_dense,
    apply_one_qubit,
    basis_state,
    entanglement_entropy,
    ghz_state,
    partial_trace,
    partial_trace_op,
    plus_state,
    purity,
    schmidt,
)
from .qfi import (
    GeneratorSpec,
    QfiValue,
    derivative_full,
    encode,
    qfi_mixed,
    qfi_pure,
    qfi_reduced,
)
from .scramblers import (
    DisorderFields,
    ScramblerSpec,
    brickwork_apply,
    evolve,
    oat_state,
    sample_haar,
    xx_fields,
    xx_hamiltonian_apply,
)
from .haar_theory import (
    DimPair,
    WeingartenTable,
    cycle_count,
    qfi_fraction_large,
    qfi_fraction_small,
    second_moment_mc_check,
    verify_large_fraction_perm_sums,
    verify_small_fraction_two_copy,
    weingarten_table,
)
from .experiments import (
    ConfigError,
    NumericalError,
    ResultRow,
    RunConfig,
    VerificationFailure,
    derive_seed,
    read_config,
    run_fig1,
    run_fig2_entropy,
    run_fig2_phase,
    run_fig3,
    write_rows,
)

__version__ = "0.1.0"
