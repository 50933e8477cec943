//! Revenue models, expected horizon revenue, and the two cost channels:
//! transcoder nodes (billed per GB-second of FaaS execution) and outbound
//! traffic (billed per GB).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::behavior::{quit_probability, BehaviorParams};
use crate::config::{PricingConfig, RevenueKind};
use crate::profiles::{NodeKind, ProfileSpec};
use crate::qoe::DeliveredStream;
use crate::scalar::Scalar;

/// Decimal convention used by cloud billing.
const KB_PER_GB: f64 = 1e6;

/// Revenue per spectator per step as a function of QoE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RevenueModel<S: Scalar> {
    pub kind: RevenueKind,
    /// Dollars per step.
    pub coefficient: S,
}

impl<S: Scalar> RevenueModel<S> {
    pub fn new(kind: RevenueKind, coefficient: S) -> Self {
        RevenueModel { kind, coefficient }
    }
}

/// Dollars per step generated by a spectator at the given QoE.
pub fn revenue_rate<S: Scalar>(qoe: S, model: &RevenueModel<S>) -> S {
    match model.kind {
        RevenueKind::Constant => model.coefficient,
        RevenueKind::Linear => model.coefficient * qoe,
        RevenueKind::Logistic => model.coefficient / (S::one() + (-qoe).exp()),
    }
}

/// Sum of survival probabilities over a horizon: p + p^2 + ... + p^steps.
pub fn survival_sum<S: Scalar>(stay_probability: S, steps: u32) -> S {
    let p = stay_probability;
    if steps == 0 || p <= S::zero() {
        return S::zero();
    }
    if p >= S::one() {
        return S::from_f64_c(steps as f64);
    }
    p * (S::one() - p.powi(steps as i32)) / (S::one() - p)
}

/// Expected revenue from one spectator over the remaining session, assuming
/// their current profile assignment (and hence QoE) persists. Each future
/// step pays out only if the spectator has survived every step up to it.
pub fn expected_horizon_revenue<S: Scalar>(
    qoe: S,
    remaining_steps: u32,
    model: &RevenueModel<S>,
    behavior: &BehaviorParams<S>,
    max_qoe: S,
) -> S {
    let dqoe = (max_qoe - qoe).max(S::zero());
    let stay = S::one() - quit_probability(dqoe, behavior);
    revenue_rate(qoe, model) * survival_sum(stay, remaining_steps)
}

/// Cost of running one transcoder for `step_seconds`.
pub fn node_rate_step<S: Scalar>(
    node_kind: NodeKind,
    pricing: &PricingConfig<S>,
    step_seconds: S,
) -> S {
    match node_kind {
        NodeKind::None => S::zero(),
        NodeKind::Cpu => pricing.memory_gb * pricing.cpu_rate * step_seconds,
        NodeKind::Gpu => pricing.memory_gb * pricing.cpu_rate * step_seconds * pricing.gpu_factor,
    }
}

/// One step's transcoder bill: each active (player, profile) runs its own
/// transcoder; the production stream runs none. Depends only on which
/// profiles are active, never on how many spectators consume them.
pub fn node_cost_step<S: Scalar>(
    active: &[BTreeSet<usize>],
    profiles: &[ProfileSpec<S>],
    pricing: &PricingConfig<S>,
    step_seconds: S,
) -> S {
    let mut total = S::zero();
    for player_active in active {
        for &n in player_active {
            total += node_rate_step(profiles[n].node_kind, pricing, step_seconds);
        }
    }
    total
}

/// Traffic cost of one delivered stream over one step.
pub fn stream_traffic_cost<S: Scalar>(
    stream: &DeliveredStream<S>,
    profiles: &[ProfileSpec<S>],
    pricing: &PricingConfig<S>,
    step_seconds: S,
) -> S {
    let kb = profiles[stream.profile].frame_size * stream.fps * step_seconds;
    kb / S::from_f64_c(KB_PER_GB) * pricing.traffic_rate
}

/// One step's traffic bill over a set of delivered streams.
pub fn traffic_cost_step<'a, S: Scalar>(
    streams: impl IntoIterator<Item = &'a DeliveredStream<S>>,
    profiles: &[ProfileSpec<S>],
    pricing: &PricingConfig<S>,
    step_seconds: S,
) -> S {
    streams
        .into_iter()
        .map(|d| stream_traffic_cost(d, profiles, pricing, step_seconds))
        .sum()
}
