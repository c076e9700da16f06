//! Independent checks of computed solutions: energy bounds, the Pohozaev
//! balance, the quadratic Hopf-Cole / ground-state correspondence and a
//! particle simulation of the invariant measure.

mod energy;
mod nls;
mod particles;
mod pohozaev;

pub use energy::{audit_energy_inequality, beta_limit, energy_report, EnergyReport, InequalityAudit};
pub use nls::{
    cross_validate_quadratic, hopf_cole_forward, hopf_cole_from_value, mass_scaling_check, nls_energy, nls_lambda,
    nls_residual, reference_mass_1d, solve_nls_ground_state, CrossValidation, GroundState, MassScalingReport,
    NlsOptions, CONCENTRATION_RATIO,
};
pub use particles::{simulate_particles, Noise, ParticleOptions, ParticleReport, MIN_PARTICLES};
pub use pohozaev::{pohozaev_residual, PohozaevReport, MAX_RADIUS};
