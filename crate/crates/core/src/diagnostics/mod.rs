//! Energy bookkeeping, discrete energy-law checks, convergence studies and
//! dense-matrix oracles for small grids.

mod convergence;
mod dense;
mod energy;

pub use convergence::{
    convergence_against, convergence_study, max_norm_error, ConvergenceTable, StudySetup,
};
pub use dense::{
    dense_multiplier_matrix, dense_oracle_step, dense_step_operator, DENSE_NODE_LIMIT,
};
pub use energy::{
    check_step, check_trace, compute_mu, dissipation, modified_energy, modified_energy_parts,
    EnergyViolation, ENERGY_RTOL,
};
