//! Common-randomness generation from correlated sources.
//!
//! The crate is organised bottom-up:
//!
//! - [`measure`]: finite-support probability measures on metric spaces, the
//!   discrete and bivariate-Gaussian joint sources, auxiliary channels and
//!   exact information quantities (all in bits).
//! - [`flow`]: max-flow routines used for coupling feasibility.
//! - [`prohorov`]: exact Prohorov distance between finite-support measures,
//!   plus a subset-enumeration oracle.
//! - [`typicality`]: empirical distributions, Prohorov typicality and the
//!   Monte-Carlo harnesses for typical-set convergence, conditional
//!   typicality and large-deviation exponents.
//! - [`protocol`]: the binning protocol (codebook, encoder, index transport,
//!   decoder) and its achievability checks.
//! - [`capacity`]: Blahut–Arimoto channel capacity, the rate function
//!   `L(t)` and the capacity bound pairs built from it.
//! - [`experiment`]: config-driven batch runner behind the `crgen` binary.
//!
//! All randomness is explicit: every sampling routine takes a 64-bit seed and
//! derives child seeds through [`seed::derive`].

#![forbid(unsafe_code)]
// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod measure;
pub mod prohorov;
pub mod protocol;
pub mod seed;
pub mod typicality;

pub use error::{Error, Result};
