//! Online learning against distributionally constrained adversaries on
//! finite atomic domains.
//!
//! The adversary picks, each round, a sampling distribution from a fixed
//! family `U` over a finite space of atoms; the learner predicts binary
//! labels. Everything the theory needs — envelope submeasures, smoothness
//! certificates `(mu0, rho)`, fragmentation numbers, uniform covers,
//! coupling reductions to smooth adversaries, lower-bound adversaries,
//! Hedge/ERM learners, and private learning via the exponential
//! mechanism — is built constructively here, with exact brute-force
//! verifiers wherever the space is small enough to enumerate.
//!
//! Restricting to finite atomic spaces makes every supremum an exact
//! maximum and every measurable set a bitmask, so the constructions can be
//! checked exhaustively rather than asymptotically.

pub mod adversary;
pub mod coupling;
pub mod cover;
pub mod dimension;
pub mod error;
pub mod harness;
pub mod hypothesis;
pub mod instance;
pub mod learner;
pub mod privacy;
pub mod profile;
pub mod protocol;
pub mod smoothness;
pub mod space;

pub use error::{Error, Result};
pub use hypothesis::HypothesisFamily;
pub use profile::ToleranceProfile;
pub use space::{Distribution, DistributionFamily, FiniteSpace, Subset, MASS_TOL};
