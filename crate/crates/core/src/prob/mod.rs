//! Exact finite-probability machinery.
//!
//! Everything here is exact arithmetic over explicitly enumerated supports,
//! with the conventions `0 ln 0 = 0` and `KL = +inf` on support mismatch.

mod beta;
mod joint;
mod pmf;

pub use beta::BetaParams;
pub use joint::{Axis, JointPmf, MutualInformation};
pub use pmf::{bernoulli, binary_sequence_pmf, entropy, kl_divergence, total_variation, FinitePmf};
pub(crate) use pmf::sample_weighted as sample_weighted_index;
pub use pmf::NORMALIZATION_TOLERANCE;
