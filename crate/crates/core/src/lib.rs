//! Engines for the size of the convoy in the multi-species ASEP speed process.
//!
//! The crate is organised bottom-up:
//!
//! * [`qseries`]: q-Pochhammer symbols, q-numbers and the q-Gamma function;
//! * [`genocchi`]: q-Gandhi polynomials, q-Genocchi numbers and surjective pistols;
//! * [`moments`]: exact expectation engines (moment recursion, q-Genocchi formula,
//!   TASEP hypergeometric form);
//! * [`qhermite`]: continuous big q-Hermite polynomials and their weight;
//! * [`kmtrans`]: Karlin–McGregor transition probabilities of the queue chain;
//! * [`queuesim`]: Monte Carlo of the coupled queue and exact path identities;
//! * [`asepsim`]: a small multi-species ASEP simulator;
//! * [`weaklimit`]: the weakly asymmetric scaling limit.

pub mod asepsim;
pub mod error;
pub mod genocchi;
pub mod kmtrans;
pub mod moments;
pub mod poly;
pub mod qhermite;
pub mod qseries;
pub mod quad;
pub mod queuesim;
pub mod scalar;
pub mod weaklimit;

pub use error::{Error, Result};
pub use genocchi::Pistol;
pub use queuesim::{CoupledState, QueueState, SimSummary};
pub use moments::{ModelParams, MomentTable};

pub use num_bigint::BigInt;
pub use num_rational::BigRational;
pub use poly::{BiPoly, LaurentPoly};
pub use qseries::{ComplexScalar, QParam};

pub use scalar::{ExactScalar, NumericScalar, Scalar};
pub use weaklimit::{DensityGrid, WeakScaling};
