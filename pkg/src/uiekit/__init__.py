"""Data-driven unknown-input estimation for discrete-time linear systems.

Builds recursive estimators that reconstruct unmeasured inputs from output
streams, designed directly from one informative input/output record: Hankel
design stacks, generalized-inverse parametrization, LMI-certified open-loop
synthesis, and Luenberger-style closed-loop correction.
"""

from .benchmark import (
    benchmark_system,
    closed_loop_excitation,
    reproduce_simulation,
    select_n_est,
    stabilizing_gain,
)
from .cl_uie import (
    ClDesignBlocks,
    GainDesignError,
    assemble_cl,
    build_cl_blocks,
    build_cl_blocks_from_candidate,
    design_cl_uie,
    design_gain,
    predict_outputs,
    selector_t_y,
)
from .estimator import (
    BatchResult,
    Estimate,
    EstimatorState,
    clamp_hook,
    init,
    mae,
    push_output,
    run_batch,
    write_estimates_csv,
)
from .gen_inverse import (
    GInverseParam,
    SvdRank,
    materialize_g,
    null_inclusion,
    null_space_basis,
    pseudo_inverse,
    random_admissible_f,
    svd_with_rank,
)
from .hankel import (
    HankelDesignStack,
    build_design_stack,
    build_hankel,
    is_persistently_exciting,
    stack_window,
    trajectory_membership,
)
from .lti import (
    IoTrajectory,
    LtiSystem,
    UnobservableError,
    lag,
    load_system,
    observability_matrix,
    random_excitation,
    save_system,
    simulate,
)
from .op_uie import (
    DesignReport,
    OpLmiData,
    UieRealization,
    assemble_op_candidate,
    build_lmi_data,
    candidate_radius_floor,
    design_op_uie,
    load_realization,
    save_realization,
    schur_radius,
)
from .sdp import (
    FeasibilityResult,
    LmiProblem,
    MatrixVar,
    dump_problem,
    solve_feasibility,
    sym_2x2,
    verify_assignment,
)

__version__ = "0.1.0"
