//! Global network identifiability analysis for parameterized linear dynamic
//! networks `w = G w + R r + H e`.
//!
//! The crate is organised bottom-up:
//!
//! * [`poly`], [`rat`], [`rmat`]: exact rational-function algebra in the
//!   shift variable `z`, and [`numeric`] for sampled normal rank.
//! * [`model`]: network models, parameterized model-set structures and the
//!   network transfer function `T = (I - G)^{-1} [R H]`.
//! * [`identifiability`]: the structural decision procedures and the
//!   [`identifiability::analyze`] pipeline.
//! * [`spectral`]: feedthrough-level objects of reduced-rank noise spectra.
//! * [`simulator`]: time-domain simulation and non-identifiability witnesses.

pub mod error;
pub mod graph;
pub mod identifiability;
pub mod matching;
pub mod model;
pub mod numeric;
pub mod poly;
pub mod random;
pub mod rat;
pub mod rmat;
pub mod simulator;
pub mod spectral;

pub use error::{Error, Result};
pub use poly::{Poly, Scalar};
pub use rat::Rat;
pub use rmat::RMat;
