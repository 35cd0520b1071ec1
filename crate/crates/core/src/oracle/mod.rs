//! Closed-form and brute-force verification of the training theory.
//!
//! Everything here has an answer known in advance: finite-grid instances of
//! the Donsker-Varadhan and Gibbs identities, a fully tractable
//! bilinear-Gaussian model whose conditionals, marginal, and partition
//! function follow from Gaussian algebra, Ornstein-Uhlenbeck flows whose KL
//! decay rate is exact, and the Gronwall second-moment envelope. The
//! `verify` suite runs the whole battery against the same sampling kernels
//! the trainer uses and reports measured gaps, so a broken drift, a wrong
//! entropy sign, or a bad step rule shows up as a failed check rather than a
//! quietly worse model.

mod flows;
mod gaussian;
mod grid;
mod verify;

pub use flows::{
    ou_contraction_test, second_moment_bound_check, talagrand_check, OuCheckpoint, OuConfig,
    OuTrajectory, SecondMomentConfig, SecondMomentReport, TalagrandReport,
};
pub use gaussian::{
    gaussian_kl_to_standard, gaussian_w2sq_to_standard, restricted_elbo_gap, BilinearEnergy,
    GaussianOracle, OracleError, RestrictedGap,
};
pub use grid::{dv_identity_check, dv_objective, gibbs_identity_check, DvCheck, GridMeasure};
pub use verify::{run_verify, CheckResult, VerifyReport};
