//! Secrecy metrics for opportunistic relay selection in a dual-hop
//! Rayleigh-fading wiretap network.
//!
//! - [`analytic`]: per-relay and selection CDFs, closed-form average secrecy
//!   rate (ASR) for decode-and-forward and amplify-and-forward selection,
//!   secrecy outage probability, and a quadrature oracle for the ASR.
//! - [`montecarlo`]: trial-based ASR and outage estimates with
//!   reproducible per-trial random streams.
//! - [`opa`]: the optimal-power-allocation DF beamformer used as a baseline.
//! - [`channel`]: network parameters and fading draws.
//! - [`specfun`], [`quadrature`]: numerical building blocks.

// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod channel;
pub mod error;
pub mod montecarlo;
pub mod opa;
pub mod quadrature;
pub mod specfun;

pub use error::{Error, Result};
pub use quadrature::QuadratureSpec;
