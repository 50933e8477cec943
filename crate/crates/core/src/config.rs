//! Session and pricing configuration, with TOML persistence.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::profiles::{build_default_profiles, production_index, ProfileSpec};
use crate::scalar::Scalar;

/// The five broad spectator device/connection classes.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum DeviceClassName {
    MobileWifi,
    Mobile4g,
    PcDsl,
    PcVdsl,
    PcFiber,
}

impl DeviceClassName {
    pub const ALL: [DeviceClassName; 5] = [
        DeviceClassName::MobileWifi,
        DeviceClassName::Mobile4g,
        DeviceClassName::PcDsl,
        DeviceClassName::PcVdsl,
        DeviceClassName::PcFiber,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DeviceClassName::MobileWifi => "mobile_wifi",
            DeviceClassName::Mobile4g => "mobile_4g",
            DeviceClassName::PcDsl => "pc_dsl",
            DeviceClassName::PcVdsl => "pc_vdsl",
            DeviceClassName::PcFiber => "pc_fiber",
        }
    }
}

/// Shape of the per-spectator revenue function of QoE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevenueKind {
    Constant,
    Linear,
    Logistic,
}

/// Which allocation strategy drives a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Smart,
    Naive,
}

impl OptimizerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizerKind::Smart => "smart",
            OptimizerKind::Naive => "naive",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "smart" => Ok(OptimizerKind::Smart),
            "naive" => Ok(OptimizerKind::Naive),
            other => Err(Error::config(format!("unknown optimizer '{other}'"))),
        }
    }
}

/// Everything that defines one streaming session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound = "")]
pub struct SessionConfig<S: Scalar> {
    /// Number of time steps in the session.
    pub steps: u32,
    /// Wall-clock seconds per step.
    pub step_seconds: S,
    /// Frame rate of the production streams.
    pub production_fps: S,
    /// Number of players being streamed.
    pub players: u32,
    pub profiles: Vec<ProfileSpec<S>>,
    /// Maximum concurrently active GPU transcoders across all players.
    pub gpu_limit: u32,
    pub initial_spectators: u32,
    /// Mean new spectators per step.
    pub arrival_rate: S,
    /// Per-step quitting probability unrelated to QoE.
    pub quit_base: S,
    /// Additional quitting probability per unit of QoE shortfall.
    pub quit_qoe_factor: S,
    pub revenue_model: RevenueKind,
    /// Revenue coefficient in dollars per spectator per step.
    pub revenue_rate: S,
    pub population_weights: BTreeMap<DeviceClassName, S>,
    pub rng_seed: u64,
}

impl<S: Scalar> Default for SessionConfig<S> {
    fn default() -> Self {
        let mut weights = BTreeMap::new();
        for class in DeviceClassName::ALL {
            weights.insert(class, S::one());
        }
        SessionConfig {
            steps: 60,
            step_seconds: S::from_f64_c(10.0),
            production_fps: S::from_f64_c(25.0),
            players: 2,
            profiles: build_default_profiles(),
            gpu_limit: 6,
            initial_spectators: 10,
            arrival_rate: S::from_f64_c(0.5),
            quit_base: S::from_f64_c(0.0037),
            quit_qoe_factor: S::from_f64_c(0.20),
            revenue_model: RevenueKind::Constant,
            revenue_rate: S::from_f64_c(0.01),
            population_weights: weights,
            rng_seed: 42,
        }
    }
}

impl<S: Scalar> SessionConfig<S> {
    pub fn validate(&self) -> Result<(), Error> {
        if self.step_seconds <= S::zero() || self.production_fps <= S::zero() {
            return Err(Error::config("step_seconds and production_fps must be positive"));
        }
        if self.players == 0 {
            return Err(Error::config("players must be at least 1"));
        }
        if self.quit_base < S::zero() || self.quit_base >= S::one() {
            return Err(Error::config("quit_base must lie in [0, 1)"));
        }
        if self.quit_qoe_factor < S::zero() {
            return Err(Error::config("quit_qoe_factor must be nonnegative"));
        }
        if self.arrival_rate < S::zero() {
            return Err(Error::config("arrival_rate must be nonnegative"));
        }
        if self.revenue_rate <= S::zero() {
            return Err(Error::config("revenue_rate must be positive"));
        }
        let mut weight_sum = S::zero();
        for (class, w) in &self.population_weights {
            if *w < S::zero() {
                return Err(Error::config(format!(
                    "population weight for {} must be nonnegative",
                    class.as_str()
                )));
            }
            weight_sum += *w;
        }
        if weight_sum <= S::zero() {
            return Err(Error::config("population weights must sum to a positive value"));
        }
        if self.profiles.is_empty() {
            return Err(Error::config("at least one profile is required"));
        }
        // the exact solver enumerates subsets of the non-production profiles
        if self.profiles.len() > 16 {
            return Err(Error::config("at most 16 profiles are supported"));
        }
        for p in &self.profiles {
            p.validate()?;
        }
        production_index(&self.profiles)?;
        Ok(())
    }
}

/// FaaS node and traffic pricing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound = "")]
pub struct PricingConfig<S: Scalar> {
    /// Dollars per GB-second of CPU function execution.
    pub cpu_rate: S,
    /// GPU node cost as a multiple of the CPU rate.
    pub gpu_factor: S,
    /// Memory reserved per transcoder, in GB.
    pub memory_gb: S,
    /// Dollars per GB of outbound traffic.
    pub traffic_rate: S,
}

impl<S: Scalar> Default for PricingConfig<S> {
    fn default() -> Self {
        PricingConfig {
            cpu_rate: S::from_f64_c(0.000017),
            gpu_factor: S::from_f64_c(10.0),
            memory_gb: S::from_f64_c(2.0),
            traffic_rate: S::from_f64_c(0.05),
        }
    }
}

impl<S: Scalar> PricingConfig<S> {
    pub fn validate(&self) -> Result<(), Error> {
        for (name, v) in [
            ("cpu_rate", self.cpu_rate),
            ("gpu_factor", self.gpu_factor),
            ("memory_gb", self.memory_gb),
            ("traffic_rate", self.traffic_rate),
        ] {
            if v <= S::zero() {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// On-disk configuration: a `[session]` table and a `[pricing]` table,
/// either of which may be omitted to use the built-in defaults. Unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound = "")]
pub struct ConfigFile<S: Scalar> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub session: Option<SessionConfig<S>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pricing: Option<PricingConfig<S>>,
}

impl<S: Scalar> ConfigFile<S> {
    pub fn defaults() -> Self {
        ConfigFile {
            session: Some(SessionConfig::default()),
            pricing: Some(PricingConfig::default()),
        }
    }

    pub fn from_str(text: &str, origin: &Path) -> Result<Self, Error> {
        let parsed: ConfigFile<S> = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        if let Some(session) = &parsed.session {
            session.validate()?;
        }
        if let Some(pricing) = &parsed.pricing {
            pricing.validate()?;
        }
        Ok(parsed)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_str(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }
}
