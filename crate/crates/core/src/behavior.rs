//! Spectator population dynamics: Poisson arrivals and QoE-driven quitting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::population::Population;
use crate::profiles::ProfileSpec;
use crate::scalar::Scalar;
use crate::spectator::Spectator;

/// Arrival and quitting parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BehaviorParams<S: Scalar> {
    /// Mean arrivals per step.
    pub arrival_rate: S,
    /// Base quitting probability per step, unrelated to QoE.
    pub quit_base: S,
    /// Extra quitting probability per unit of QoE shortfall.
    pub quit_qoe_factor: S,
}

impl<S: Scalar> BehaviorParams<S> {
    pub fn new(arrival_rate: S, quit_base: S, quit_qoe_factor: S) -> Self {
        BehaviorParams { arrival_rate, quit_base, quit_qoe_factor }
    }
}

/// Draw an arrival count from a Poisson law with mean `rate`, by inverting
/// a running product of uniforms. Exact for the small rates used here.
pub fn sample_arrivals<S: Scalar, R: Rng>(rate: S, rng: &mut R) -> Result<u32, Error> {
    if rate < S::zero() {
        return Err(Error::config("arrival rate must be nonnegative"));
    }
    let threshold = (-rate.as_f64()).exp();
    let mut product = 1.0f64;
    let mut count = 0u32;
    loop {
        product *= rng.random::<f64>();
        if product <= threshold {
            return Ok(count);
        }
        count += 1;
        if count > 1_000_000 {
            return Err(Error::contract("arrival sampling failed to terminate"));
        }
    }
}

/// Per-step quitting probability for a QoE shortfall of `dqoe`, clamped
/// to 1.
pub fn quit_probability<S: Scalar>(dqoe: S, params: &BehaviorParams<S>) -> S {
    let q = params.quit_base + dqoe * params.quit_qoe_factor;
    if q > S::one() {
        S::one()
    } else {
        q
    }
}

/// Probability of surviving a whole sequence of per-step quit
/// probabilities: the product of the per-step stay probabilities.
pub fn retention_probability<S: Scalar>(quit_sequence: impl IntoIterator<Item = S>) -> S {
    quit_sequence
        .into_iter()
        .fold(S::one(), |acc, q| acc * (S::one() - q))
}

/// Independently decide, for each `(id, dqoe)` pair in order, whether that
/// spectator quits this step. Returns the quitting ids.
pub fn sample_quits<S: Scalar, R: Rng>(
    spectators: &[(u64, S)],
    params: &BehaviorParams<S>,
    rng: &mut R,
) -> Vec<u64> {
    spectators
        .iter()
        .filter(|(_, dqoe)| {
            let q = quit_probability(*dqoe, params).as_f64();
            rng.random::<f64>() < q
        })
        .map(|(id, _)| *id)
        .collect()
}

/// Create a fresh spectator: unique id, class drawn from the population
/// sampler, bandwidth at the class baseline, nothing allocated yet.
pub fn spawn_spectator<S: Scalar, R: Rng>(
    id: u64,
    population: &Population<S>,
    profiles: &[ProfileSpec<S>],
    join_step: u32,
    rng: &mut R,
) -> Spectator<S> {
    let class = population.sample(rng);
    Spectator::new(id, class, profiles, join_step)
}
