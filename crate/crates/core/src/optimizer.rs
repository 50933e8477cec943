//! Per-step allocation of transcoding profiles to spectators.
//!
//! Two strategies share one evaluation function:
//!
//! * [`smart_allocate`] maximizes expected total profit exactly, by
//!   enumerating per-player active-profile subsets and solving each
//!   spectator's best response independently within them.
//! * [`naive_allocate`] greedily maximizes each spectator's QoE and
//!   activates whatever that demands, blind to cost.
//!
//! [`exhaustive_oracle`] searches the raw assignment space and is the
//! reference the subset solver is checked against.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::behavior::{quit_probability, BehaviorParams};
use crate::config::PricingConfig;
use crate::economics::{
    expected_horizon_revenue, node_cost_step, node_rate_step, revenue_rate, survival_sum,
    traffic_cost_step,
};
use crate::error::Error;
use crate::profiles::{NodeKind, ProfileSpec};
use crate::qoe::{effective_framerate, profile_combos, spectator_qoe, DeliveredStream};
use crate::scalar::Scalar;
use crate::spectator::Spectator;

/// Everything an allocation decision depends on besides the spectators.
#[derive(Debug, Clone, Copy)]
pub struct OptimizerContext<'a, S: Scalar> {
    pub profiles: &'a [ProfileSpec<S>],
    pub pricing: &'a PricingConfig<S>,
    pub revenue: &'a crate::economics::RevenueModel<S>,
    pub behavior: &'a BehaviorParams<S>,
    pub players: usize,
    pub production_fps: S,
    pub step_seconds: S,
    pub screen_fraction: S,
    /// Steps left in the session, including the current one.
    pub remaining_steps: u32,
    /// Maximum concurrently active GPU transcoders across players.
    pub gpu_limit: u32,
    /// Restrict the subset search to identical per-player sets. Off by
    /// default; spectator demand need not be symmetric even when the
    /// profile table is.
    pub symmetric_subsets: bool,
}

/// One spectator's slice of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SpectatorPlan<S: Scalar> {
    pub spectator: u64,
    /// One delivered stream per player.
    pub streams: Vec<DeliveredStream<S>>,
    pub qoe: S,
    pub dqoe: S,
}

/// One step's joint decision: which profiles run per player, and what each
/// spectator consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Plan<S: Scalar> {
    /// Consumed profiles per player; a profile is active exactly when some
    /// spectator consumes it.
    pub active: Vec<BTreeSet<usize>>,
    pub assignments: Vec<SpectatorPlan<S>>,
    pub etp: S,
}

impl<S: Scalar> Plan<S> {
    pub fn empty(players: usize) -> Self {
        Plan {
            active: vec![BTreeSet::new(); players],
            assignments: Vec::new(),
            etp: S::zero(),
        }
    }

    /// Count of active GPU transcoders across players.
    pub fn gpu_active(&self, profiles: &[ProfileSpec<S>]) -> u32 {
        self.active
            .iter()
            .flat_map(|set| set.iter())
            .filter(|&&n| profiles[n].node_kind == NodeKind::Gpu)
            .count() as u32
    }
}

// ---------------------------------------------------------------------------
// Per-spectator candidate tables
// ---------------------------------------------------------------------------

/// One feasible per-player profile choice for one spectator, with
/// everything the solvers rank by.
#[derive(Debug, Clone)]
struct Candidate<S: Scalar> {
    combo: Vec<usize>,
    fps: S,
    reduction: S,
    qoe: S,
    dqoe: S,
    /// Expected horizon revenue minus one step of traffic.
    value: S,
    traffic: S,
    /// Required non-production bit per player; 0 where production.
    required_bits: Vec<u64>,
    uses_gpu: bool,
}

struct CandidateTable<S: Scalar> {
    candidates: Vec<Candidate<S>>,
    /// Candidate indices ordered by descending value (ties: lower traffic,
    /// then lexicographic combo).
    by_value: Vec<u32>,
    /// Candidate indices ordered by descending QoE (same tie-breaks).
    by_qoe: Vec<u32>,
}

impl<S: Scalar> CandidateTable<S> {
    fn allowed(&self, idx: u32, masks: &[u64]) -> bool {
        let c = &self.candidates[idx as usize];
        c.required_bits
            .iter()
            .zip(masks)
            .all(|(&req, &mask)| req & !mask == 0)
    }

    fn best_by_value(&self, masks: &[u64]) -> u32 {
        *self
            .by_value
            .iter()
            .find(|&&i| self.allowed(i, masks))
            .expect("production-only choice is always allowed")
    }
}

/// Map from profile index to its bit in subset masks (production has none).
fn non_production_bits<S: Scalar>(profiles: &[ProfileSpec<S>]) -> Vec<Option<u32>> {
    let mut bit = 0u32;
    profiles
        .iter()
        .map(|p| {
            if p.is_production() {
                None
            } else {
                let b = bit;
                bit += 1;
                Some(b)
            }
        })
        .collect()
}

fn build_candidate_table<S: Scalar>(
    spectator: &Spectator<S>,
    ctx: &OptimizerContext<'_, S>,
    bits: &[Option<u32>],
) -> CandidateTable<S> {
    let n = ctx.profiles.len();
    let mut candidates: Vec<Candidate<S>> = Vec::new();
    let mut max_qoe = S::neg_infinity();

    for combo in profile_combos(n, ctx.players) {
        let Some(delivered) =
            effective_framerate(spectator, &combo, ctx.profiles, ctx.production_fps)
        else {
            continue;
        };
        let qoe = spectator_qoe(&delivered, ctx.profiles, ctx.screen_fraction);
        if qoe > max_qoe {
            max_qoe = qoe;
        }
        let traffic = traffic_cost_step(
            delivered.iter(),
            ctx.profiles,
            ctx.pricing,
            ctx.step_seconds,
        );
        let required_bits = combo
            .iter()
            .map(|&p| bits[p].map_or(0u64, |b| 1u64 << b))
            .collect();
        let uses_gpu = combo
            .iter()
            .any(|&p| ctx.profiles[p].node_kind == NodeKind::Gpu);
        candidates.push(Candidate {
            fps: delivered[0].fps,
            reduction: delivered[0].reduction,
            combo,
            qoe,
            dqoe: S::zero(),
            value: S::zero(),
            traffic,
            required_bits,
            uses_gpu,
        });
    }

    // value needs the spectator's best achievable QoE, hence a second pass
    for c in &mut candidates {
        c.dqoe = (max_qoe - c.qoe).max(S::zero());
        let stay = S::one() - quit_probability(c.dqoe, ctx.behavior);
        c.value = revenue_rate(c.qoe, ctx.revenue) * survival_sum(stay, ctx.remaining_steps)
            - c.traffic;
    }

    let mut by_value: Vec<u32> = (0..candidates.len() as u32).collect();
    by_value.sort_by(|&a, &b| {
        let (ca, cb) = (&candidates[a as usize], &candidates[b as usize]);
        cb.value
            .partial_cmp(&ca.value)
            .unwrap()
            .then(ca.traffic.partial_cmp(&cb.traffic).unwrap())
            .then(ca.combo.cmp(&cb.combo))
    });
    let mut by_qoe: Vec<u32> = (0..candidates.len() as u32).collect();
    by_qoe.sort_by(|&a, &b| {
        let (ca, cb) = (&candidates[a as usize], &candidates[b as usize]);
        cb.qoe
            .partial_cmp(&ca.qoe)
            .unwrap()
            .then(ca.traffic.partial_cmp(&cb.traffic).unwrap())
            .then(ca.combo.cmp(&cb.combo))
    });

    CandidateTable { candidates, by_value, by_qoe }
}

fn plan_from_choices<S: Scalar>(
    spectators: &[Spectator<S>],
    tables: &[CandidateTable<S>],
    choices: &[u32],
    ctx: &OptimizerContext<'_, S>,
) -> Plan<S> {
    let mut active = vec![BTreeSet::new(); ctx.players];
    let mut assignments = Vec::with_capacity(spectators.len());
    let mut value_sum = S::zero();
    for ((spectator, table), &choice) in spectators.iter().zip(tables).zip(choices) {
        let c = &table.candidates[choice as usize];
        for (k, &p) in c.combo.iter().enumerate() {
            active[k].insert(p);
        }
        value_sum += c.value;
        assignments.push(SpectatorPlan {
            spectator: spectator.id,
            streams: c
                .combo
                .iter()
                .map(|&p| DeliveredStream { profile: p, fps: c.fps, reduction: c.reduction })
                .collect(),
            qoe: c.qoe,
            dqoe: c.dqoe,
        });
    }
    let node = node_cost_step(&active, ctx.profiles, ctx.pricing, ctx.step_seconds)
        * S::from_f64_c(ctx.remaining_steps as f64);
    Plan { active, assignments, etp: value_sum - node }
}

// ---------------------------------------------------------------------------
// Evaluation and validation
// ---------------------------------------------------------------------------

/// Expected total profit of a plan over the remaining session: each
/// spectator contributes the expected revenue they will generate until they
/// quit or the session ends (at the QoE the plan delivers, assumed to
/// persist) minus one step of their traffic bill; each active transcoder
/// charges for the remaining steps, since the allocation it serves is
/// assumed to persist as well.
pub fn evaluate_etp<S: Scalar>(
    plan: &Plan<S>,
    spectators: &[Spectator<S>],
    ctx: &OptimizerContext<'_, S>,
) -> Result<S, Error> {
    if plan.assignments.len() != spectators.len() {
        return Err(Error::contract("plan does not cover the spectator set"));
    }
    let mut total = S::zero();
    for (spectator, assignment) in spectators.iter().zip(&plan.assignments) {
        if assignment.spectator != spectator.id {
            return Err(Error::contract("plan assignment order does not match spectators"));
        }
        let qoe = spectator_qoe(&assignment.streams, ctx.profiles, ctx.screen_fraction);
        let max_qoe = crate::qoe::max_feasible_qoe(
            spectator,
            ctx.profiles,
            ctx.players,
            ctx.production_fps,
            ctx.screen_fraction,
        );
        let revenue =
            expected_horizon_revenue(qoe, ctx.remaining_steps, ctx.revenue, ctx.behavior, max_qoe);
        let traffic = traffic_cost_step(
            assignment.streams.iter(),
            ctx.profiles,
            ctx.pricing,
            ctx.step_seconds,
        );
        total += revenue - traffic;
    }
    let node = node_cost_step(&plan.active, ctx.profiles, ctx.pricing, ctx.step_seconds)
        * S::from_f64_c(ctx.remaining_steps as f64);
    Ok(total - node)
}

/// Check every structural plan invariant against the spectator set.
pub fn validate_plan<S: Scalar>(
    plan: &Plan<S>,
    spectators: &[Spectator<S>],
    ctx: &OptimizerContext<'_, S>,
) -> Result<(), Error> {
    let eps = S::from_f64_c(1e-9);
    if plan.active.len() != ctx.players {
        return Err(Error::contract("plan has wrong player count"));
    }
    if plan.assignments.len() != spectators.len() {
        return Err(Error::contract("plan does not cover the spectator set"));
    }
    let mut consumed = vec![BTreeSet::new(); ctx.players];
    for (spectator, assignment) in spectators.iter().zip(&plan.assignments) {
        if assignment.spectator != spectator.id {
            return Err(Error::contract("assignment order does not match spectators"));
        }
        if assignment.streams.len() != ctx.players {
            return Err(Error::contract("spectator must receive exactly one profile per player"));
        }
        let mut bandwidth_used = S::zero();
        for stream in &assignment.streams {
            let profile = &ctx.profiles[stream.profile];
            if stream.fps <= S::zero() || stream.fps > ctx.production_fps + eps {
                return Err(Error::contract("delivered fps out of range"));
            }
            let expected_reduction = S::one() - stream.fps / ctx.production_fps;
            if (stream.reduction - expected_reduction).abs() > eps
                || stream.reduction < S::zero()
                || stream.reduction >= S::one()
            {
                return Err(Error::contract("reduction fraction inconsistent with fps"));
            }
            if !profile.skippable && (stream.fps - ctx.production_fps).abs() > eps {
                return Err(Error::contract(
                    "non-skippable profile delivered below production rate",
                ));
            }
            if stream.fps > spectator.decode_cap(stream.profile) + eps {
                return Err(Error::contract("delivered fps exceeds decode capacity"));
            }
            bandwidth_used += profile.frame_size * stream.fps;
        }
        if bandwidth_used > spectator.bandwidth_now * (S::one() + eps) {
            return Err(Error::contract("assignment exceeds spectator bandwidth"));
        }
        for (k, stream) in assignment.streams.iter().enumerate() {
            consumed[k].insert(stream.profile);
        }
    }
    if consumed != plan.active {
        return Err(Error::contract("active sets must equal the consumed profiles"));
    }
    let gpu_active = plan.gpu_active(ctx.profiles);
    if gpu_active > ctx.gpu_limit {
        return Err(Error::contract(format!(
            "{gpu_active} GPU transcoders active, limit is {}",
            ctx.gpu_limit
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Best response
// ---------------------------------------------------------------------------

/// A spectator's best choice within the offered per-player profile sets
/// (production is always offered): the feasible choice maximizing expected
/// horizon revenue minus its own traffic contribution.
pub fn best_response<S: Scalar>(
    spectator: &Spectator<S>,
    offered: &[BTreeSet<usize>],
    ctx: &OptimizerContext<'_, S>,
) -> SpectatorPlan<S> {
    let bits = non_production_bits(ctx.profiles);
    let table = build_candidate_table(spectator, ctx, &bits);
    let masks: Vec<u64> = offered
        .iter()
        .map(|set| {
            set.iter()
                .filter_map(|&p| bits[p].map(|b| 1u64 << b))
                .fold(0u64, |acc, b| acc | b)
        })
        .collect();
    let choice = &table.candidates[table.best_by_value(&masks) as usize];
    SpectatorPlan {
        spectator: spectator.id,
        streams: choice
            .combo
            .iter()
            .map(|&p| DeliveredStream { profile: p, fps: choice.fps, reduction: choice.reduction })
            .collect(),
        qoe: choice.qoe,
        dqoe: choice.dqoe,
    }
}

// ---------------------------------------------------------------------------
// Smart allocation: exact subset-enumeration solver
// ---------------------------------------------------------------------------

/// Maximize expected total profit exactly.
///
/// Enumerates, per player, every subset of non-production profiles that
/// could be offered, solves each spectator's best response independently
/// (valid because the objective separates per spectator once the offered
/// sets are fixed), and keeps the best plan. Subsets leaving any offered
/// profile unconsumed are skipped: the consumed set itself is enumerated
/// and yields the identical plan. Subset combinations exceeding the GPU
/// limit are filtered out.
pub fn smart_allocate<S: Scalar>(
    spectators: &[Spectator<S>],
    ctx: &OptimizerContext<'_, S>,
) -> Plan<S> {
    if spectators.is_empty() {
        return Plan::empty(ctx.players);
    }
    let bits = non_production_bits(ctx.profiles);
    let n_bits = bits.iter().flatten().count() as u32;
    let gpu_mask: u64 = ctx
        .profiles
        .iter()
        .zip(&bits)
        .filter(|(p, _)| p.node_kind == NodeKind::Gpu)
        .filter_map(|(_, b)| b.map(|b| 1u64 << b))
        .fold(0, |acc, b| acc | b);

    let tables: Vec<CandidateTable<S>> = spectators
        .iter()
        .map(|s| build_candidate_table(s, ctx, &bits))
        .collect();

    // per-bit node rate, for consumed-set costing inside the scan
    let bit_rate: Vec<S> = {
        let mut rates = vec![S::zero(); n_bits as usize];
        for (p, b) in ctx.profiles.iter().zip(&bits) {
            if let Some(b) = b {
                rates[*b as usize] = node_rate_step(p.node_kind, ctx.pricing, ctx.step_seconds);
            }
        }
        rates
    };
    let horizon = S::from_f64_c(ctx.remaining_steps as f64);

    let subsets_per_player = 1u64 << n_bits;
    let mut best: Option<(S, Vec<u32>)> = None;
    let mut masks = vec![0u64; ctx.players];
    let mut choices = vec![0u32; spectators.len()];
    let mut consumed = vec![0u64; ctx.players];

    let mut counter = 0u64;
    let total = subsets_per_player.pow(ctx.players as u32);
    while counter < total {
        // decode the counter into per-player masks
        let mut c = counter;
        for mask in masks.iter_mut() {
            *mask = c & (subsets_per_player - 1);
            c >>= n_bits;
        }
        counter += 1;

        if ctx.symmetric_subsets && masks.iter().any(|&m| m != masks[0]) {
            continue;
        }
        let gpu_offered: u32 = masks.iter().map(|m| (m & gpu_mask).count_ones()).sum();
        if gpu_offered > ctx.gpu_limit {
            continue;
        }

        let mut value_sum = S::zero();
        for c in consumed.iter_mut() {
            *c = 0;
        }
        for (i, table) in tables.iter().enumerate() {
            let idx = table.best_by_value(&masks);
            choices[i] = idx;
            let cand = &table.candidates[idx as usize];
            value_sum += cand.value;
            for (k, &req) in cand.required_bits.iter().enumerate() {
                consumed[k] |= req;
            }
        }
        // dominated subset: something offered went unconsumed
        if consumed != masks {
            continue;
        }
        let mut node = S::zero();
        for &mask in &consumed {
            let mut m = mask;
            while m != 0 {
                let b = m.trailing_zeros();
                node += bit_rate[b as usize];
                m &= m - 1;
            }
        }
        let etp = value_sum - node * horizon;
        if best.as_ref().is_none_or(|(best_etp, _)| etp > *best_etp) {
            best = Some((etp, choices.clone()));
        }
    }

    let (_, choices) = best.expect("the production-only subset is always evaluated");
    plan_from_choices(spectators, &tables, &choices, ctx)
}

// ---------------------------------------------------------------------------
// Naive allocation: QoE-greedy
// ---------------------------------------------------------------------------

/// Give every spectator the feasible choice maximizing their QoE, cost be
/// damned. If that opens more GPU transcoders than allowed, spectators with
/// the smallest QoE loss are demoted to their best GPU-free choice until
/// the limit holds.
pub fn naive_allocate<S: Scalar>(
    spectators: &[Spectator<S>],
    ctx: &OptimizerContext<'_, S>,
) -> Plan<S> {
    if spectators.is_empty() {
        return Plan::empty(ctx.players);
    }
    let bits = non_production_bits(ctx.profiles);
    let full_masks = vec![u64::MAX; ctx.players];
    let tables: Vec<CandidateTable<S>> = spectators
        .iter()
        .map(|s| build_candidate_table(s, ctx, &bits))
        .collect();

    let mut choices: Vec<u32> = tables
        .iter()
        .map(|t| {
            *t.by_qoe
                .iter()
                .find(|&&i| t.allowed(i, &full_masks))
                .expect("a feasible choice always exists")
        })
        .collect();

    let gpu_count = |choices: &[u32]| -> u32 {
        let mut active = vec![0u64; ctx.players];
        for (table, &choice) in tables.iter().zip(choices) {
            let cand = &table.candidates[choice as usize];
            for (k, &req) in cand.required_bits.iter().enumerate() {
                active[k] |= req;
            }
        }
        active
            .iter()
            .map(|m| {
                let mut gpu = 0u32;
                let mut mask = *m;
                while mask != 0 {
                    let b = mask.trailing_zeros();
                    let profile = bits.iter().position(|&x| x == Some(b)).unwrap();
                    if ctx.profiles[profile].node_kind == NodeKind::Gpu {
                        gpu += 1;
                    }
                    mask &= mask - 1;
                }
                gpu
            })
            .sum()
    };

    while gpu_count(&choices) > ctx.gpu_limit {
        // cheapest demotion: smallest QoE drop to a GPU-free choice
        let mut cheapest: Option<(S, usize, u32)> = None;
        for (i, table) in tables.iter().enumerate() {
            let current = &table.candidates[choices[i] as usize];
            if !current.uses_gpu {
                continue;
            }
            let fallback = *table
                .by_qoe
                .iter()
                .find(|&&c| !table.candidates[c as usize].uses_gpu)
                .expect("skippable profiles guarantee a GPU-free choice");
            let loss = current.qoe - table.candidates[fallback as usize].qoe;
            if cheapest.as_ref().is_none_or(|(best_loss, _, _)| loss < *best_loss) {
                cheapest = Some((loss, i, fallback));
            }
        }
        let Some((_, idx, fallback)) = cheapest else {
            break;
        };
        choices[idx] = fallback;
    }

    plan_from_choices(spectators, &tables, &choices, ctx)
}

/// Dispatch on the optimizer kind.
pub fn allocate<S: Scalar>(
    kind: crate::config::OptimizerKind,
    spectators: &[Spectator<S>],
    ctx: &OptimizerContext<'_, S>,
) -> Plan<S> {
    match kind {
        crate::config::OptimizerKind::Smart => smart_allocate(spectators, ctx),
        crate::config::OptimizerKind::Naive => naive_allocate(spectators, ctx),
    }
}

// ---------------------------------------------------------------------------
// Exhaustive oracle
// ---------------------------------------------------------------------------

/// Hard cap on the assignment space the oracle will enumerate.
pub const ORACLE_CAP: f64 = 5e6;

/// Brute force over every complete assignment: the reference optimum for
/// test-scale instances. Refuses instances whose assignment space exceeds
/// `ORACLE_CAP`.
pub fn exhaustive_oracle<S: Scalar>(
    spectators: &[Spectator<S>],
    ctx: &OptimizerContext<'_, S>,
) -> Result<Plan<S>, Error> {
    if spectators.is_empty() {
        return Ok(Plan::empty(ctx.players));
    }
    let combos_per_spectator = (ctx.profiles.len() as f64).powi(ctx.players as i32);
    let space = combos_per_spectator.powi(spectators.len() as i32);
    if space > ORACLE_CAP {
        return Err(Error::InstanceTooLarge(space));
    }

    let bits = non_production_bits(ctx.profiles);
    let tables: Vec<CandidateTable<S>> = spectators
        .iter()
        .map(|s| build_candidate_table(s, ctx, &bits))
        .collect();
    let horizon = S::from_f64_c(ctx.remaining_steps as f64);

    let mut selection: Vec<u32> = vec![0; spectators.len()];
    let mut best: Option<(S, Vec<u32>)> = None;
    'outer: loop {
        // evaluate the current selection
        let mut value_sum = S::zero();
        let mut consumed = vec![0u64; ctx.players];
        for (table, &choice) in tables.iter().zip(&selection) {
            let cand = &table.candidates[choice as usize];
            value_sum += cand.value;
            for (k, &req) in cand.required_bits.iter().enumerate() {
                consumed[k] |= req;
            }
        }
        let gpu_active: u32 = consumed
            .iter()
            .map(|m| {
                let mut gpu = 0u32;
                let mut mask = *m;
                while mask != 0 {
                    let b = mask.trailing_zeros();
                    let profile = bits.iter().position(|&x| x == Some(b)).unwrap();
                    if ctx.profiles[profile].node_kind == NodeKind::Gpu {
                        gpu += 1;
                    }
                    mask &= mask - 1;
                }
                gpu
            })
            .sum();
        if gpu_active <= ctx.gpu_limit {
            let mut node = S::zero();
            for (k, mask) in consumed.iter().enumerate() {
                let mut m = *mask;
                while m != 0 {
                    let b = m.trailing_zeros();
                    let profile = bits.iter().position(|&x| x == Some(b)).unwrap();
                    let _ = k;
                    node += node_rate_step(ctx.profiles[profile].node_kind, ctx.pricing, ctx.step_seconds);
                    m &= m - 1;
                }
            }
            let etp = value_sum - node * horizon;
            if best.as_ref().is_none_or(|(best_etp, _)| etp > *best_etp) {
                best = Some((etp, selection.clone()));
            }
        }

        // advance the mixed-radix counter over feasible candidates
        for i in 0..selection.len() {
            selection[i] += 1;
            if (selection[i] as usize) < tables[i].candidates.len() {
                continue 'outer;
            }
            selection[i] = 0;
        }
        break;
    }

    let (_, selection) = best.ok_or_else(|| Error::contract("oracle found no feasible plan"))?;
    Ok(plan_from_choices(spectators, &tables, &selection, ctx))
}

// ---------------------------------------------------------------------------
// Randomized solver verification
// ---------------------------------------------------------------------------

/// Outcome of a randomized smart-vs-oracle comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCheckReport {
    pub instances: u32,
    /// Largest |smart - oracle| ETP gap observed.
    pub max_deviation: f64,
}

/// One randomly drawn test instance: a profile subset (production always
/// included), a few spectators with perturbed capacities, and randomized
/// economics.
pub struct RandomInstance {
    pub profiles: Vec<ProfileSpec<f64>>,
    pub spectators: Vec<Spectator<f64>>,
    pub pricing: PricingConfig<f64>,
    pub revenue: crate::economics::RevenueModel<f64>,
    pub behavior: BehaviorParams<f64>,
    pub remaining_steps: u32,
    pub gpu_limit: u32,
}

impl RandomInstance {
    pub fn generate(seed: u64, index: u64, max_spectators: u32) -> Self {
        use crate::config::RevenueKind;
        use crate::population::build_default_classes;
        use crate::profiles::build_default_profiles;
        use rand::seq::IndexedRandom;
        use rand::Rng;

        let mut rng = crate::rng::stream(seed, crate::rng::StreamKind::Instances, index, 0);
        let all_profiles = build_default_profiles::<f64>();

        // production plus up to three others keeps the oracle fast
        let mut indices: Vec<usize> = (1..all_profiles.len()).collect();
        for i in (1..indices.len()).rev() {
            indices.swap(i, rng.random_range(0..=i));
        }
        let extra = rng.random_range(1..=3usize);
        let mut chosen: Vec<usize> = indices.into_iter().take(extra).collect();
        chosen.sort_unstable();
        let mut profiles = vec![all_profiles[0].clone()];
        profiles.extend(chosen.into_iter().map(|i| all_profiles[i].clone()));

        let classes = build_default_classes(&profiles);
        let n_spectators = rng.random_range(1..=max_spectators.max(1));
        let spectators: Vec<Spectator<f64>> = (0..n_spectators as u64)
            .map(|id| {
                let class = classes.choose(&mut rng).unwrap();
                let mut s = Spectator::new(id, class, &profiles, 0);
                s.bandwidth_now = s.base_bandwidth * rng.random_range(0.5..1.5);
                s.decode_scale_now = rng.random_range(0.7..1.3);
                s
            })
            .collect();

        let mut pricing = PricingConfig::<f64>::default();
        pricing.gpu_factor = rng.random_range(5.0..20.0);
        pricing.traffic_rate = rng.random_range(0.05..0.10);
        let kind = *[RevenueKind::Constant, RevenueKind::Linear, RevenueKind::Logistic]
            .choose(&mut rng)
            .unwrap();
        let revenue = crate::economics::RevenueModel::new(kind, rng.random_range(0.002..0.02));
        let behavior = BehaviorParams::new(0.5, rng.random_range(0.0..0.02), rng.random_range(0.05..0.5));
        let remaining_steps = rng.random_range(1..=60);
        let gpu_limit = rng.random_range(0..=6);

        RandomInstance { profiles, spectators, pricing, revenue, behavior, remaining_steps, gpu_limit }
    }

    pub fn ctx(&self) -> OptimizerContext<'_, f64> {
        OptimizerContext {
            profiles: &self.profiles,
            pricing: &self.pricing,
            revenue: &self.revenue,
            behavior: &self.behavior,
            players: 2,
            production_fps: 25.0,
            step_seconds: 10.0,
            screen_fraction: 0.03,
            remaining_steps: self.remaining_steps,
            gpu_limit: self.gpu_limit,
            symmetric_subsets: false,
        }
    }
}

/// Run `instances` randomized instances, checking that the subset solver
/// matches the exhaustive oracle to 1e-9 and that both plans (plus the
/// greedy one) are structurally valid with smart dominating naive.
pub fn oracle_check(
    instances: u32,
    max_spectators: u32,
    seed: u64,
) -> Result<OracleCheckReport, Error> {
    let tolerance = 1e-9;
    let mut max_deviation = 0.0f64;
    for index in 0..instances {
        let instance = RandomInstance::generate(seed, index as u64, max_spectators);
        let ctx = instance.ctx();
        let smart = smart_allocate(&instance.spectators, &ctx);
        let oracle = exhaustive_oracle(&instance.spectators, &ctx)?;
        let naive = naive_allocate(&instance.spectators, &ctx);
        validate_plan(&smart, &instance.spectators, &ctx)?;
        validate_plan(&oracle, &instance.spectators, &ctx)?;
        validate_plan(&naive, &instance.spectators, &ctx)?;

        let smart_etp = evaluate_etp(&smart, &instance.spectators, &ctx)?;
        let oracle_etp = evaluate_etp(&oracle, &instance.spectators, &ctx)?;
        let naive_etp = evaluate_etp(&naive, &instance.spectators, &ctx)?;
        if (smart_etp - smart.etp).abs() > tolerance || (oracle_etp - oracle.etp).abs() > tolerance
        {
            return Err(Error::contract(format!(
                "instance {index}: stored ETP disagrees with evaluation"
            )));
        }
        let deviation = (smart_etp - oracle_etp).abs();
        if deviation > max_deviation {
            max_deviation = deviation;
        }
        if deviation > tolerance {
            return Err(Error::contract(format!(
                "instance {index}: smart ETP {smart_etp} != oracle ETP {oracle_etp}"
            )));
        }
        if smart_etp < naive_etp - tolerance {
            return Err(Error::contract(format!(
                "instance {index}: smart ETP {smart_etp} below naive ETP {naive_etp}"
            )));
        }
    }
    Ok(OracleCheckReport { instances, max_deviation })
}
