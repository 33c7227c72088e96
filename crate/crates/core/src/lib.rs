//! Deterministic kinetic solver for the Boltzmann equation with Haldane
//! fractional exclusion statistics on the periodic box `[0,1]^k`.
//!
//! The unknown `f(t, x, v)` takes values in `[0, 1/α]`. The scheme truncates
//! collisions to `|v|² + |v_*|² ≤ j²`, regularizes the filling factor to
//! `F_j`, mollifies the initial datum, and advances with Strang splitting of
//! exact free transport and a bound-preserving exponential collision step.

pub mod collision;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod kernel;
pub mod quadrature;
pub mod runner;
pub mod solver;
pub mod statistics;

pub use collision::{
    collision_geometry, collision_operator, gain, loss_rates, CollisionOperator, CollisionRates,
};
pub use diagnostics::{
    bony_functional, conserved_moments, l1_distance, sup_mass_density, tail_mass, DiagnosticsRecord,
};
pub use error::{Error, Result};
pub use field::DistributionField;
pub use grid::{chi_j, PhaseGrid, SphereNode, SphereRule};
pub use kernel::{make_maxwellian_type_kernel, make_soft_kernel, validate_kernel, KernelCertificate, KernelSpec};
pub use solver::{exponential_collision_step, mollify_initial, run, transport, InitialData, SolverConfig, Splitting};
pub use statistics::{
    equilibrium_field, filling_factor, filling_factor_regularized, occupation_ratio, EquilibriumSpec,
    StatisticsParam,
};

/// `build_grid(k, nx, j, nv, rule)`: lattice spanning `[-j, j]^3`.
pub fn build_grid(k: usize, nx: usize, j_level: f64, nv: usize, sphere_rule: SphereRule) -> Result<PhaseGrid> {
    PhaseGrid::build(k, nx, j_level, nv, sphere_rule)
}
