//! Best-of-both-worlds multi-armed bandits under adversarially delayed feedback.
//!
//! The core is generic over the floating-point type through [`Scalar`]; the
//! `*64` aliases below fix it to `f64`, which is what the harness and CLI use.

pub mod config;
pub mod desapo;
pub mod eap;
pub mod env;
pub mod error;
pub mod fallback;
pub mod ghost;
pub mod harness;
pub mod oracles;
pub mod policy;
pub mod scalar;
pub mod scheduler;
pub mod stats;

pub use config::{AlgoKind, ExperimentConfig};
pub use desapo::{ConstantsProfile, Desapo, DesapoOptions, SwitchMode, Variant};
pub use env::{DelayModel, Environment, LossModel};
pub use error::{Error, Result};
pub use fallback::{DelayedExp3, Fallback};
pub use harness::{run_batch, run_once, BatchSummary, RunTrace, TraceDetail};
pub use policy::Policy;
pub use scalar::Scalar;
pub use scheduler::{DelayLedger, RoundRecord};
pub use stats::ProcessedLog;

pub type Desapo64 = Desapo<f64>;
pub type Desapo32 = Desapo<f32>;
pub type ProcessedLog64 = ProcessedLog<f64>;
pub type DelayLedger64 = DelayLedger<f64>;
pub type RoundRecord64 = RoundRecord<f64>;
pub type DelayedExp3_64 = DelayedExp3<f64>;
