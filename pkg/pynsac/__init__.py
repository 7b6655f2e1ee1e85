from .spectral import (
    GridSpec,
    SpectralScalar,
    SolenoidalVector,
    State,
    divergence_defect,
    to_grid,
    from_grid,
    apply_A,
    apply_A_pow,
    apply_A_gamma,
    apply_A_gamma_pow,
    gradient,
    divergence,
    leray_project,
    inner_L2,
    norm_L2,
    norm_H1,
    norm_gamma,
    norm_Y,
    norm_V,
    dual_norm_Vprime,
    dual_norm_DAgamma_prime,
    y_embedding,
    dealiased_product,
    pointwise,
    exact_integral,
    taylor_green,
    random_scalar,
    random_solenoidal,
)
from .model import (
    PotentialSpec,
    ModelParams,
    eval_f,
    eval_f_gamma,
    eval_F_gamma,
    F_gamma_integral,
    free_energy,
    chemical_potential,
    b0,
    B0,
    b1,
    B1,
    R0,
    b1_potential,
    coupling_potential,
    coupling_term,
)
from .gronwall import (
    GronwallInput,
    gronwall_bound,
    gronwall_sequence,
    uniform_gronwall_bound,
    window_sums,
    geometric_recursion_bound,
)
from .stepper import (
    StepperConfig,
    StepReport,
    TrajectoryLog,
    NonConvergenceError,
    DivergenceError,
    implicit_step,
    scheme_residual,
    run,
    advance,
    interp_pc,
    interp_lin,
    ConsistencyReport,
    consistency_residuals,
)
from .diagnostics import (
    EnergyBreakdown,
    AuditRecord,
    energy_E,
    lyapunov_energy,
    remainder_density,
    remainder_R,
    remainder_bound_check,
    energy_identity_residual,
    kappa_candidate,
    rho0_candidate,
    kappa1_step_bound,
    energy_decay_bound,
    dissipation_sums,
    increment_sums,
    audit_step,
    audit_hook,
    audit_frame,
    diagnostics_frame,
    audit_states,
    energy_series,
    observed_absorbing_radius,
)
from .attractor import (
    StateCloud,
    ConvergenceRow,
    ensemble_rng,
    random_state,
    hausdorff_semidistance,
    absorbing_entry_time,
    sample_attractor,
    finite_time_errors,
    convergence_study,
    convergence_frame,
)
from .io_utils import (
    read_snapshot,
    write_snapshot,
    read_cloud,
    write_cloud,
)
from .cli import RunConfig, load_config
from .version import __version__
from .utils import show_versions
