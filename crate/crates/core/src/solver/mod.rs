//! Finite-volume solver for `div(δ∇v) = div F` on a disk (`d = 3`) and
//! the measurements taken on its solutions.

mod experiments;
mod grid;
mod measure;
mod system;

pub use experiments::{
    check_sweep, decay_experiment, fit_gradient_sweep, forcing_norm, gradient_probe,
    gradient_rate_sweep, log_spaced, lower_bound_experiment, mode_exponent, moser_level,
    moser_sup_check, odd_sector_mode, summarize_moser, DecayReport, LowerBoundConfig,
    LowerBoundReport, MoserLevel, MoserReport, SweepPoint, SweepReport,
};
pub use grid::{DiskField, PolarGrid};
pub use measure::{
    center_value, ckn_ratio, hardy_trace_ratio, max_gradient_within, omega_annulus, omega_circle,
    omega_profile, verify_oscillation_decay, weighted_dirichlet, DecayProfile,
};
pub use system::{
    assemble_disk_system, solve_disk, solve_problem, solve_with, BoundaryData, DiskSolver,
    DiskSystem, Forcing, JacobiCg,
};
