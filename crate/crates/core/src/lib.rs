//! Multi-instant cognitive access for a primary/secondary pair sharing a
//! slotted collision channel.
//!
//! The secondary user may access the channel at the start of a slot without
//! sensing, or at any of the instants `τ, 2τ, …, Mτ` with an access
//! probability that depends on the sensing outcome accumulated so far. This
//! crate provides:
//!
//! * [`channel`]: Rayleigh block-fading packet success probabilities.
//! * [`sensing`]: false-alarm / misdetection profiles indexed by sensing quanta.
//! * [`analytic`]: primary service rate, queue-empty probability, queueing
//!   delay, secondary throughput and the perfect-knowledge bound.
//! * [`optimizer`]: multistart search for the best access policy of each
//!   protocol variant under primary stability and a delay cap.
//! * [`simulator`]: slot-level Monte Carlo of the whole system.
//!
//! The math is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! the scalar for the common cases.

pub mod analytic;
pub mod channel;
pub mod error;
pub mod optimizer;
pub mod scalar;
pub mod sensing;
pub mod simulator;
pub mod stats;

pub use analytic::{AccessModel, AccessPolicy, AnalyticMetrics, TrafficParams};
pub use channel::{LinkId, SystemParams};
pub use error::{Error, Result};
pub use optimizer::{OptimizationResult, OptimizerSettings, ProtocolVariant, VariantConstraints};
pub use scalar::Scalar;
pub use sensing::{ProfileViolation, RocPoint, SensingProfile};
pub use simulator::{SimConfig, SimMetrics};

pub type SystemParams64 = SystemParams<f64>;
pub type SystemParams32 = SystemParams<f32>;
pub type SensingProfile64 = SensingProfile<f64>;
pub type SensingProfile32 = SensingProfile<f32>;
pub type AccessPolicy64 = AccessPolicy<f64>;
pub type AccessPolicy32 = AccessPolicy<f32>;
pub type TrafficParams64 = TrafficParams<f64>;
pub type TrafficParams32 = TrafficParams<f32>;
pub type AnalyticMetrics64 = AnalyticMetrics<f64>;
pub type AccessModel64 = AccessModel<f64>;
pub type OptimizationResult64 = OptimizationResult<f64>;
pub type VariantConstraints64 = VariantConstraints<f64>;
