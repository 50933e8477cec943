//! Per-spectator state carried across simulation steps.

use serde::{Deserialize, Serialize};

use crate::config::DeviceClassName;
use crate::population::DeviceClass;
use crate::profiles::ProfileSpec;
use crate::qoe::DeliveredStream;
use crate::scalar::Scalar;

/// An active spectator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Spectator<S: Scalar> {
    pub id: u64,
    pub class: DeviceClassName,
    /// Typical bandwidth of the class, KB/s.
    pub base_bandwidth: S,
    /// Bandwidth this step after fluctuation, KB/s.
    pub bandwidth_now: S,
    /// Decode caps per profile index at nominal processing power.
    pub decode_caps: Vec<S>,
    /// Processing-power fluctuation factor applied to decode caps.
    pub decode_scale_now: S,
    pub join_step: u32,
    /// One stream per player once allocated.
    pub allocation: Option<Vec<DeliveredStream<S>>>,
    pub qoe_now: S,
    /// Gap between the best QoE this spectator could get and what they got.
    pub dqoe_now: S,
}

impl<S: Scalar> Spectator<S> {
    pub fn new(
        id: u64,
        class: &DeviceClass<S>,
        profiles: &[ProfileSpec<S>],
        join_step: u32,
    ) -> Self {
        let decode_caps = class
            .decode_caps_for(profiles)
            .expect("class table covers every profile");
        Spectator {
            id,
            class: class.name,
            base_bandwidth: class.base_bandwidth,
            bandwidth_now: class.base_bandwidth,
            decode_caps,
            decode_scale_now: S::one(),
            join_step,
            allocation: None,
            qoe_now: S::zero(),
            dqoe_now: S::zero(),
        }
    }

    /// Effective decode cap for a profile after processing fluctuation.
    pub fn decode_cap(&self, profile: usize) -> S {
        self.decode_caps[profile] * self.decode_scale_now
    }
}
