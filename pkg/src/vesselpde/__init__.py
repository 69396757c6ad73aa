"""Exact solutions of integrable PDEs from finite-dimensional realizations.

A solution family is encoded by constant matrices (A, B0, X0) tied together
by a Lyapunov equation and a triple of p x p coefficient matrices.  Linear
flows in x and t evolve the realization, and every claimed identity —
flow compatibility, Lyapunov invariance, transfer-function relations,
the nonlinear PDEs themselves — is checkable numerically to tight
tolerances through :mod:`vesselpde.verify` and the CLI.
"""

__version__ = "0.1.0"

from .core import (
    CheckReport,
    LyapunovResidual,
    Realization,
    VesselParams,
    check_realization,
    load_json,
    lyapunov_residual,
    params_from_dict,
    params_to_dict,
    preset_params,
    random_realization,
    random_soliton_realization,
    realization_from_dict,
    realization_from_discrete_spectrum,
    realization_to_dict,
    resonance_threshold,
    resonant_pairs,
    save_json,
    solve_lyapunov,
    validate_params,
)
from .evolution import (
    FieldFrame,
    FlowGenerators,
    VesselState,
    beta_NLS,
    build_generators,
    cansys_fields,
    cansys_structure_report,
    evolve_B,
    evolve_X,
    fit_K,
    generator_commutation,
    moments,
    q_SL,
    sample_frame,
    state_at,
    state_derivatives,
)
from .exceptions import (
    CompatibilityError,
    ConditioningError,
    FlowRangeError,
    GridError,
    IntegrationError,
    PoleError,
    ResonanceError,
    StructureError,
    TauZeroError,
    VesselError,
)
from .hierarchy import (
    DiffPoly,
    FlowTerm,
    GRat,
    b0,
    bn,
    build_Y,
    build_flow_term,
    dp_add,
    dp_dx,
    dp_eval,
    dp_eval_grid,
    dp_integrate,
    dp_mul,
    dp_scale,
    flow_polynomial,
    hierarchy_flow_X_rhs,
    hierarchy_residual,
    next_b,
    render,
)
from .scattering import (
    backlund_check,
    ds_dt_check,
    ds_dx_check,
    input_lde_solution,
    input_solution,
    junitarity_check,
    pole_distance,
    s_decay_check,
    s_eval,
    system_check,
)
from .verify import (
    ConvergenceStudy,
    ResidualField,
    Stencil,
    cansys_residual,
    convergence_study,
    differentiate,
    fd_weights,
    gamma_star_evolution_residual,
    kdv_residual,
    nls_residual,
    run_suite,
)

__all__ = [name for name in dir() if not name.startswith("_")]
