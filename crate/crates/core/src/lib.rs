//! Simulation of memory-shared photonic quantum memristor networks in
//! truncated Fock space.
//!
//! The numerical core ([`fock`], [`optics`], [`memdevice`], [`network`],
//! [`metrics`], [`classifier`]) is generic over the real scalar type
//! ([`Real`], implemented for `f32` and `f64`). The experiment drivers and
//! the reservoir pipeline run in `f64`; the aliases below name the concrete
//! types they use.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod dataio;
pub mod error;
pub mod experiments;
pub mod fock;
pub mod linalg;
pub mod memdevice;
pub mod metrics;
pub mod network;
pub mod optics;
pub mod reservoir;
pub mod scalar;

pub use error::{Error, IdxError, Result};
pub use fock::{FockBasis, Occupation, Truncation};
pub use memdevice::UpdateOrder;
pub use metrics::AreaConvention;
pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;
pub type CMatrix64 = linalg::CMatrix<f64>;
pub type PureState = fock::PureState<f64>;
pub type MixedState = fock::MixedState<f64>;
pub type ModeUnitary = optics::ModeUnitary<f64>;
pub type FockUnitary = optics::FockUnitary<f64>;
pub type MemParams = memdevice::MemParams<f64>;
pub type PqmtUnit = memdevice::PqmtUnit<f64>;
pub type PqmtDevice = network::PqmtDevice<f64>;
pub type PqmtNetwork = network::PqmtNetwork<f64>;
pub type StepRecord = network::StepRecord<f64>;
pub type DeviceRecord = network::DeviceRecord<f64>;
pub type LoopCurve = metrics::LoopCurve<f64>;
