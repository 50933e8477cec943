//! Simulator and profit optimizer for serverless adaptive streaming sessions.
//!
//! A session streams the live feeds of a few players (two by default) to a
//! fluctuating population of spectators. Each step the provider decides
//! which transcoding profiles to produce and which profile each spectator
//! consumes, trading transcoder and traffic costs against the revenue kept
//! alive by spectator quality of experience. The whole pipeline is
//! deterministic given a seed.
//!
//! Core math is generic over the scalar type (see [`scalar::Scalar`]); the
//! crate root exposes `f64` aliases which the simulator, sweep harness and
//! CLI use throughout.

pub mod behavior;
pub mod config;
pub mod economics;
pub mod error;
pub mod optimizer;
pub mod output;
pub mod population;
pub mod profiles;
pub mod qoe;
pub mod rng;
pub mod scalar;
pub mod simulator;
pub mod spectator;
pub mod sweep;

pub use error::Error;
pub use scalar::Scalar;

/// Concrete `f64` instantiations of the generic core types.
pub type ProfileSpec = profiles::ProfileSpec<f64>;
pub type DeviceClass = population::DeviceClass<f64>;
pub type Population = population::Population<f64>;
pub type Spectator = spectator::Spectator<f64>;
pub type SessionConfig = config::SessionConfig<f64>;
pub type PricingConfig = config::PricingConfig<f64>;
pub type ConfigFile = config::ConfigFile<f64>;
pub type BehaviorParams = behavior::BehaviorParams<f64>;
pub type RevenueModel = economics::RevenueModel<f64>;
pub type DeliveredStream = qoe::DeliveredStream<f64>;
pub type Plan = optimizer::Plan<f64>;
pub type OptimizerContext<'a> = optimizer::OptimizerContext<'a, f64>;
pub type StepMetrics = simulator::StepMetrics<f64>;
pub type SessionTrace = simulator::SessionTrace<f64>;

pub use config::{DeviceClassName, OptimizerKind, RevenueKind};
pub use profiles::NodeKind;
