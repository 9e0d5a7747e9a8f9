//! Compressed sensing with normalized tight frames.
//!
//! The crate covers the whole pipeline for the l1-analysis program
//! `min ||D^T g||_1  s.t.  ||y - Phi g||_2 <= eps`:
//!
//! * [`frames`]: normalized tight frames (`D D^T = I`) and their analysis,
//!   synthesis and column-restriction operators.
//! * [`measurement`]: Gaussian sensing matrices and noisy measurements.
//! * [`drip`]: exact and sampled dictionary-restricted isometry constants.
//! * [`decompose`]: l1-preserving convex decomposition into k-sparse atoms.
//! * [`solver`]: a primal-dual hybrid gradient solver for the program above.
//! * [`bounds`]: the reconstruction-error bound valid when `delta_2k < 2/3`.
//! * [`experiment`]: reproducible end-to-end trials and the self-test suite.
//!
//! All matrices are small and dense; see [`numerics`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod decompose;
pub mod drip;
pub mod error;
pub mod experiment;
pub mod frames;
pub mod measurement;
pub mod numerics;
pub mod solver;

pub use error::{Error, Result};
