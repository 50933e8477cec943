//! The per-session loop: fluctuate, allocate, account, quit, arrive.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::behavior::{quit_probability, sample_arrivals, spawn_spectator, BehaviorParams};
use crate::config::{OptimizerKind, PricingConfig, SessionConfig};
use crate::economics::{node_cost_step, revenue_rate, traffic_cost_step, RevenueModel};
use crate::error::Error;
use crate::optimizer::{
    allocate, evaluate_etp, naive_allocate, smart_allocate, validate_plan, OptimizerContext, Plan,
};
use crate::population::{build_population, Population};
use crate::qoe::default_screen_fraction;
use crate::rng::{stream, StreamKind};
use crate::scalar::Scalar;
use crate::spectator::Spectator;

/// Relative spread of the per-step bandwidth and processing fluctuations.
pub const FLUCTUATION_SIGMA: f64 = 0.10;
/// Fluctuation factors are clamped to this band around 1.
pub const FLUCTUATION_CLAMP: (f64, f64) = (0.7, 1.3);

/// Everything measured during one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StepMetrics<S: Scalar> {
    pub step: u32,
    /// Spectators active (and earning) during this step.
    pub spectators: u32,
    /// New spectators that arrived at the end of this step; they are first
    /// served, and first counted, in the next one.
    pub arrivals: u32,
    pub quits: u32,
    pub revenue: S,
    pub node_cost: S,
    pub traffic_cost: S,
    pub profit: S,
    pub mean_qoe: S,
    pub mean_dqoe: S,
    /// Names of the active profiles, per player.
    pub active_profiles: Vec<Vec<String>>,
}

/// Session-level aggregates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SessionTotals<S: Scalar> {
    pub revenue: S,
    pub node_cost: S,
    pub traffic_cost: S,
    pub profit: S,
    /// Mean spectator count over steps.
    pub mean_spectators: S,
    /// Spectator-weighted mean QoE over the session.
    pub mean_qoe: S,
    /// Spectator-weighted mean QoE shortfall over the session.
    pub mean_dqoe: S,
    /// Sum of spectator QoE per step, averaged over steps.
    pub total_qoe: S,
    pub final_spectators: u32,
}

/// A full session run: per-step metrics plus aggregates. Fully determined
/// by the configuration and seed, both of which it carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SessionTrace<S: Scalar> {
    pub config: SessionConfig<S>,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub steps: Vec<StepMetrics<S>>,
    pub totals: SessionTotals<S>,
}

/// Optional per-step verification hooks, used by the test suites.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Check every produced plan against the structural plan invariants.
    pub validate_plans: bool,
    /// Recompute both optimizers each step and require the smart plan to
    /// evaluate at least as well as the naive one.
    pub check_dominance: bool,
    /// Restrict the smart solver to symmetric per-player subsets.
    pub symmetric_subsets: bool,
}

/// Draw a fluctuation factor: normal around 1, clamped to the band.
fn fluctuation_factor<R: Rng>(sigma: f64, rng: &mut R) -> f64 {
    let normal = Normal::new(1.0, sigma).expect("sigma is nonnegative");
    normal.sample(rng).clamp(FLUCTUATION_CLAMP.0, FLUCTUATION_CLAMP.1)
}

/// Refresh a spectator's bandwidth and processing power for a new step.
pub fn apply_fluctuations<S: Scalar, R: Rng>(
    spectator: &mut Spectator<S>,
    sigma: f64,
    rng: &mut R,
) {
    let bandwidth = fluctuation_factor(sigma, rng);
    let decode = fluctuation_factor(sigma, rng);
    spectator.bandwidth_now = spectator.base_bandwidth * S::from_f64_c(bandwidth);
    spectator.decode_scale_now = S::from_f64_c(decode);
}

/// Live state of one session between steps.
pub struct SessionState<S: Scalar> {
    pub config: SessionConfig<S>,
    pub pricing: PricingConfig<S>,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub step: u32,
    pub spectators: Vec<Spectator<S>>,
    next_id: u64,
    population: Population<S>,
    options: RunOptions,
}

impl<S: Scalar> SessionState<S> {
    pub fn new(
        config: SessionConfig<S>,
        pricing: PricingConfig<S>,
        optimizer: OptimizerKind,
        seed: u64,
        options: RunOptions,
    ) -> Result<Self, Error> {
        config.validate()?;
        pricing.validate()?;
        let population = build_population(&config.profiles, &config.population_weights)?;
        let mut state = SessionState {
            config,
            pricing,
            optimizer,
            seed,
            step: 0,
            spectators: Vec::new(),
            next_id: 0,
            population,
            options,
        };
        for _ in 0..state.config.initial_spectators {
            state.spawn(0);
        }
        Ok(state)
    }

    fn spawn(&mut self, join_step: u32) {
        let id = self.next_id;
        self.next_id += 1;
        let mut rng = stream(self.seed, StreamKind::ClassDraw, id, 0);
        let spectator =
            spawn_spectator(id, &self.population, &self.config.profiles, join_step, &mut rng);
        self.spectators.push(spectator);
    }

    fn behavior(&self) -> BehaviorParams<S> {
        BehaviorParams::new(
            self.config.arrival_rate,
            self.config.quit_base,
            self.config.quit_qoe_factor,
        )
    }

    fn revenue_model(&self) -> RevenueModel<S> {
        RevenueModel::new(self.config.revenue_model, self.config.revenue_rate)
    }

    /// Run one step: fluctuations, allocation, accounting, quits, arrivals.
    pub fn advance_step(&mut self) -> Result<StepMetrics<S>, Error> {
        if self.step >= self.config.steps {
            return Err(Error::contract("advance_step called past the final step"));
        }
        let t = self.step;

        for spectator in &mut self.spectators {
            let mut rng = stream(self.seed, StreamKind::Fluctuations, spectator.id, t as u64);
            apply_fluctuations(spectator, FLUCTUATION_SIGMA, &mut rng);
        }

        let behavior = self.behavior();
        let revenue_model = self.revenue_model();
        let ctx = OptimizerContext {
            profiles: &self.config.profiles,
            pricing: &self.pricing,
            revenue: &revenue_model,
            behavior: &behavior,
            players: self.config.players as usize,
            production_fps: self.config.production_fps,
            step_seconds: self.config.step_seconds,
            screen_fraction: default_screen_fraction(),
            remaining_steps: self.config.steps - t,
            gpu_limit: self.config.gpu_limit,
            symmetric_subsets: self.options.symmetric_subsets,
        };

        let plan: Plan<S> = allocate(self.optimizer, &self.spectators, &ctx);
        if self.options.validate_plans {
            validate_plan(&plan, &self.spectators, &ctx)?;
        }
        if self.options.check_dominance {
            let (smart, naive) = match self.optimizer {
                OptimizerKind::Smart => (plan.clone(), naive_allocate(&self.spectators, &ctx)),
                OptimizerKind::Naive => (smart_allocate(&self.spectators, &ctx), plan.clone()),
            };
            let smart_etp = evaluate_etp(&smart, &self.spectators, &ctx)?;
            let naive_etp = evaluate_etp(&naive, &self.spectators, &ctx)?;
            if smart_etp < naive_etp - S::from_f64_c(1e-9) {
                return Err(Error::contract(format!(
                    "smart plan ({smart_etp}) evaluated below naive plan ({naive_etp}) at step {t}"
                )));
            }
        }

        // settle the plan on the spectators and account for the step
        let mut revenue = S::zero();
        let mut qoe_sum = S::zero();
        let mut dqoe_sum = S::zero();
        for (spectator, assignment) in self.spectators.iter_mut().zip(&plan.assignments) {
            spectator.allocation = Some(assignment.streams.clone());
            spectator.qoe_now = assignment.qoe;
            spectator.dqoe_now = assignment.dqoe;
            revenue += revenue_rate(assignment.qoe, &revenue_model);
            qoe_sum += assignment.qoe;
            dqoe_sum += assignment.dqoe;
        }
        let node_cost = node_cost_step(
            &plan.active,
            &self.config.profiles,
            &self.pricing,
            self.config.step_seconds,
        );
        let traffic_cost = traffic_cost_step(
            plan.assignments.iter().flat_map(|a| a.streams.iter()),
            &self.config.profiles,
            &self.pricing,
            self.config.step_seconds,
        );
        let count = self.spectators.len() as u32;
        let count_s = S::from_f64_c(count as f64);
        let (mean_qoe, mean_dqoe) = if count > 0 {
            (qoe_sum / count_s, dqoe_sum / count_s)
        } else {
            (S::zero(), S::zero())
        };
        let active_profiles = plan
            .active
            .iter()
            .map(|set| set.iter().map(|&n| self.config.profiles[n].name.clone()).collect())
            .collect();

        // quits react to the QoE just delivered; the step's revenue stands
        let mut quitting = Vec::new();
        for spectator in &self.spectators {
            let mut rng = stream(self.seed, StreamKind::Quits, spectator.id, t as u64);
            let q = quit_probability(spectator.dqoe_now, &behavior).as_f64();
            if rng.random::<f64>() < q {
                quitting.push(spectator.id);
            }
        }
        self.spectators.retain(|s| !quitting.contains(&s.id));

        let mut arrivals_rng = stream(self.seed, StreamKind::Arrivals, 0, t as u64);
        let arrivals = sample_arrivals(self.config.arrival_rate, &mut arrivals_rng)?;
        for _ in 0..arrivals {
            self.spawn(t);
        }

        self.step += 1;
        Ok(StepMetrics {
            step: t,
            spectators: count,
            arrivals,
            quits: quitting.len() as u32,
            revenue,
            node_cost,
            traffic_cost,
            profit: revenue - node_cost - traffic_cost,
            mean_qoe,
            mean_dqoe,
            active_profiles,
        })
    }
}

/// Run a whole session. Deterministic given `(config, pricing, optimizer,
/// seed)`.
pub fn run_session<S: Scalar>(
    config: &SessionConfig<S>,
    pricing: &PricingConfig<S>,
    optimizer: OptimizerKind,
    seed: u64,
    options: RunOptions,
) -> Result<SessionTrace<S>, Error> {
    let mut state = SessionState::new(config.clone(), pricing.clone(), optimizer, seed, options)?;
    let mut steps = Vec::with_capacity(config.steps as usize);
    let mut totals = SessionTotals::default();
    let mut spectator_steps = 0u64;
    let mut qoe_sum = S::zero();
    let mut dqoe_sum = S::zero();
    for _ in 0..config.steps {
        let metrics = state.advance_step()?;
        totals.revenue += metrics.revenue;
        totals.node_cost += metrics.node_cost;
        totals.traffic_cost += metrics.traffic_cost;
        totals.profit += metrics.profit;
        spectator_steps += metrics.spectators as u64;
        let count_s = S::from_f64_c(metrics.spectators as f64);
        qoe_sum += metrics.mean_qoe * count_s;
        dqoe_sum += metrics.mean_dqoe * count_s;
        steps.push(metrics);
    }
    let n_steps = S::from_f64_c(config.steps as f64);
    if config.steps > 0 {
        totals.mean_spectators = S::from_f64_c(spectator_steps as f64) / n_steps;
        totals.total_qoe = qoe_sum / n_steps;
    }
    if spectator_steps > 0 {
        let weight = S::from_f64_c(spectator_steps as f64);
        totals.mean_qoe = qoe_sum / weight;
        totals.mean_dqoe = dqoe_sum / weight;
    }
    totals.final_spectators = state.spectators.len() as u32;
    Ok(SessionTrace {
        config: state.config.clone(),
        seed,
        optimizer: state.optimizer,
        steps,
        totals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quick_config() -> SessionConfig<f64> {
        let mut config = SessionConfig::default();
        config.steps = 8;
        config.initial_spectators = 4;
        config
    }

    #[test]
    fn zero_steps_yield_an_empty_trace() {
        let mut config = quick_config();
        config.steps = 0;
        let trace = run_session(
            &config,
            &PricingConfig::default(),
            OptimizerKind::Naive,
            1,
            RunOptions::default(),
        )
        .unwrap();
        assert!(trace.steps.is_empty());
        assert_eq!(trace.totals.revenue, 0.0);
        assert_eq!(trace.totals.profit, 0.0);
        assert_eq!(trace.totals.mean_spectators, 0.0);
    }

    #[test]
    fn identical_seeds_replay_identical_traces() {
        let config = quick_config();
        let pricing = PricingConfig::default();
        for kind in [OptimizerKind::Smart, OptimizerKind::Naive] {
            let a = run_session(&config, &pricing, kind, 1234, RunOptions::default()).unwrap();
            let b = run_session(&config, &pricing, kind, 1234, RunOptions::default()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn profit_identity_holds_on_every_step() {
        let config = quick_config();
        let trace = run_session(
            &config,
            &PricingConfig::default(),
            OptimizerKind::Smart,
            7,
            RunOptions { validate_plans: true, ..Default::default() },
        )
        .unwrap();
        for m in &trace.steps {
            assert_eq!(m.profit, m.revenue - m.node_cost - m.traffic_cost);
        }
        let profit_sum: f64 = trace.steps.iter().map(|m| m.profit).sum();
        assert!((trace.totals.profit - profit_sum).abs() < 1e-12);
    }

    #[test]
    fn population_recurrence_holds() {
        let config = quick_config();
        let trace = run_session(
            &config,
            &PricingConfig::default(),
            OptimizerKind::Naive,
            99,
            RunOptions::default(),
        )
        .unwrap();
        for pair in trace.steps.windows(2) {
            let expected = pair[0].spectators - pair[0].quits + pair[0].arrivals;
            assert_eq!(pair[1].spectators, expected);
        }
    }

    #[test]
    fn frozen_population_earns_exactly_rate_times_steps() {
        let mut config = quick_config();
        config.steps = 20;
        config.initial_spectators = 10;
        config.arrival_rate = 0.0;
        config.quit_base = 0.0;
        config.quit_qoe_factor = 0.0;
        let trace = run_session(
            &config,
            &PricingConfig::default(),
            OptimizerKind::Naive,
            5,
            RunOptions::default(),
        )
        .unwrap();
        for m in &trace.steps {
            assert_eq!(m.spectators, 10);
            assert_eq!(m.quits, 0);
            assert_eq!(m.arrivals, 0);
        }
        let expected = 10.0 * 20.0 * config.revenue_rate;
        assert!((trace.totals.revenue - expected).abs() < 1e-9);
    }

    #[test]
    fn advancing_past_the_final_step_is_a_contract_error() {
        let config = quick_config();
        let mut state = SessionState::new(
            config.clone(),
            PricingConfig::default(),
            OptimizerKind::Naive,
            1,
            RunOptions::default(),
        )
        .unwrap();
        for _ in 0..config.steps {
            state.advance_step().unwrap();
        }
        assert!(matches!(state.advance_step(), Err(Error::Contract(_))));
    }

    #[test]
    fn empty_sessions_report_zero_money() {
        let mut config = quick_config();
        config.initial_spectators = 0;
        config.arrival_rate = 0.0;
        let trace = run_session(
            &config,
            &PricingConfig::default(),
            OptimizerKind::Smart,
            1,
            RunOptions::default(),
        )
        .unwrap();
        assert_eq!(trace.totals.revenue, 0.0);
        assert_eq!(trace.totals.profit, 0.0);
        for m in &trace.steps {
            assert_eq!(m.spectators, 0);
            assert_eq!(m.revenue, 0.0);
            assert_eq!(m.mean_qoe, 0.0);
        }
    }

    #[test]
    fn fluctuations_stay_in_the_clamp_band() {
        let mut spectator = {
            let profiles = crate::profiles::build_default_profiles::<f64>();
            let classes = crate::population::build_default_classes(&profiles);
            Spectator::new(0, &classes[0], &profiles, 0)
        };
        let base = spectator.base_bandwidth;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            apply_fluctuations(&mut spectator, FLUCTUATION_SIGMA, &mut rng);
            assert!(spectator.bandwidth_now >= 0.7 * base - 1e-12);
            assert!(spectator.bandwidth_now <= 1.3 * base + 1e-12);
            assert!(spectator.decode_scale_now >= 0.7 - 1e-12);
            assert!(spectator.decode_scale_now <= 1.3 + 1e-12);
        }
    }

    #[test]
    fn zero_sigma_means_no_fluctuation() {
        let mut spectator = {
            let profiles = crate::profiles::build_default_profiles::<f64>();
            let classes = crate::population::build_default_classes(&profiles);
            Spectator::new(0, &classes[0], &profiles, 0)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            apply_fluctuations(&mut spectator, 0.0, &mut rng);
            assert_eq!(spectator.bandwidth_now, spectator.base_bandwidth);
            assert_eq!(spectator.decode_scale_now, 1.0);
        }
    }

    #[test]
    fn fluctuation_factor_mean_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let draws = 100_000;
        let sum: f64 = (0..draws)
            .map(|_| fluctuation_factor(FLUCTUATION_SIGMA, &mut rng))
            .sum();
        assert!((sum / draws as f64 - 1.0).abs() < 0.003);
    }

    #[test]
    fn dominance_check_passes_on_default_sessions() {
        let config = quick_config();
        let options = RunOptions { validate_plans: true, check_dominance: true, ..Default::default() };
        run_session(&config, &PricingConfig::default(), OptimizerKind::Naive, 3, options).unwrap();
        run_session(&config, &PricingConfig::default(), OptimizerKind::Smart, 3, options).unwrap();
    }
}
