//! Hierarchical compressive random access on sub-channelized OFDM resources.
//!
//! Users hit one of `c` sub-channels, each observed through `m` rows of the
//! `n`-point DFT over `t` slots. The receiver finds the active users per
//! sub-channel with a hierarchical threshold on slot-averaged correlation
//! energy, then estimates channels and QPSK data on the detected support.
//!
//! [`montecarlo`] drives end-to-end trials, [`bounds`] evaluates the analytic
//! tail and capacity expressions, and [`validation`] checks one against the other.

pub mod bounds;
pub mod detect;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod measurement;
pub mod model;
pub mod montecarlo;
pub mod rng;
pub mod validation;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{ConfigParams, DetectorMode, SystemConfig};

pub type C64 = num_complex::Complex<f64>;
