//! Dependence functionals entering the right-hand sides.

pub mod mart;
pub mod max_moment;
pub mod mc;
pub mod mixing;
pub mod profile;

pub use mart::{mart_approx, MartApprox};
pub use max_moment::{max_moment, max_moment_auto, max_moment_exact_dp, max_moment_mc_grid, running_maxima, MaxMethod, MaxMoment};
pub use mc::{arch_conditional_profile, arch_profile, profile_mc, ArchConditional, McOptions};
pub use mixing::{gordin_bounds, lambda_profile, v2_alpha, GordinBounds, LambdaProfile, MixingSummary};
pub use profile::{profile_delta_nu, profile_exact, ProfileMode, ProfileSe, ProjectiveProfile};
