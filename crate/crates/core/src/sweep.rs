//! Experiment sweeps: vary one variable, pair seeds across optimizers,
//! average replications, and emit plot-ready tables.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{DeviceClassName, OptimizerKind, RevenueKind};
use crate::error::Error;
use crate::output::{format_sig6, write_file};
use crate::rng::derive_seed;
use crate::simulator::{run_session, RunOptions, SessionTrace};
use crate::{PricingConfig, SessionConfig};

/// The experiment variables a sweep can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    ArrivalRate,
    RevenueRate,
    GpuCount,
    RevenueModel,
    GpuCostFactor,
    PopulationMix,
    QuittingParams,
}

impl SweepVariable {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVariable::ArrivalRate => "arrival_rate",
            SweepVariable::RevenueRate => "revenue_rate",
            SweepVariable::GpuCount => "gpu_count",
            SweepVariable::RevenueModel => "revenue_model",
            SweepVariable::GpuCostFactor => "gpu_cost_factor",
            SweepVariable::PopulationMix => "population_mix",
            SweepVariable::QuittingParams => "quitting_params",
        }
    }
}

/// One value of the swept variable.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepPoint {
    ArrivalRate(f64),
    RevenueRate(f64),
    GpuCount(u32),
    RevenueModel { kind: RevenueKind, coefficient: f64 },
    GpuCostFactor(f64),
    /// One class gets double weight, the rest stay at one.
    PopulationMix(DeviceClassName),
    /// Session-end quit probability (mapped to a per-step base) plus the
    /// QoE sensitivity.
    Quitting { label: String, session_quit: f64, qoe_factor: f64 },
}

impl SweepPoint {
    /// Stable label for the CSV `value` column (comma-free).
    pub fn label(&self) -> String {
        match self {
            SweepPoint::ArrivalRate(v)
            | SweepPoint::RevenueRate(v)
            | SweepPoint::GpuCostFactor(v) => format!("{v}"),
            SweepPoint::GpuCount(v) => format!("{v}"),
            SweepPoint::RevenueModel { kind, .. } => match kind {
                RevenueKind::Constant => "constant".to_string(),
                RevenueKind::Linear => "linear".to_string(),
                RevenueKind::Logistic => "logistic".to_string(),
            },
            SweepPoint::PopulationMix(class) => class.as_str().to_string(),
            SweepPoint::Quitting { label, .. } => label.clone(),
        }
    }

    fn apply(&self, session: &mut SessionConfig, pricing: &mut PricingConfig) {
        match self {
            SweepPoint::ArrivalRate(v) => session.arrival_rate = *v,
            SweepPoint::RevenueRate(v) => session.revenue_rate = *v,
            SweepPoint::GpuCount(v) => session.gpu_limit = *v,
            SweepPoint::RevenueModel { kind, coefficient } => {
                session.revenue_model = *kind;
                session.revenue_rate = *coefficient;
            }
            SweepPoint::GpuCostFactor(v) => pricing.gpu_factor = *v,
            SweepPoint::PopulationMix(dominant) => {
                for (class, w) in session.population_weights.iter_mut() {
                    *w = if class == dominant { 2.0 } else { 1.0 };
                }
            }
            SweepPoint::Quitting { session_quit, qoe_factor, .. } => {
                let steps = session.steps.max(1) as f64;
                session.quit_base = 1.0 - (1.0 - session_quit).powf(1.0 / steps);
                session.quit_qoe_factor = *qoe_factor;
            }
        }
    }
}

/// A sweep: one variable over a value list, everything else held at the
/// base configuration, `replications` paired sessions per cell.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub points: Vec<SweepPoint>,
    pub replications: u32,
    pub base_seed: u64,
    pub session: SessionConfig,
    pub pricing: PricingConfig,
}

impl SweepSpec {
    /// The standard value list for each variable.
    pub fn builtin_points(variable: SweepVariable) -> Vec<SweepPoint> {
        match variable {
            SweepVariable::ArrivalRate => [0.25, 0.5, 0.75, 1.0]
                .into_iter()
                .map(SweepPoint::ArrivalRate)
                .collect(),
            SweepVariable::RevenueRate => [0.0025, 0.005, 0.01, 0.02]
                .into_iter()
                .map(SweepPoint::RevenueRate)
                .collect(),
            SweepVariable::GpuCount => {
                [0u32, 2, 4, 6].into_iter().map(SweepPoint::GpuCount).collect()
            }
            SweepVariable::RevenueModel => vec![
                SweepPoint::RevenueModel { kind: RevenueKind::Constant, coefficient: 0.01 },
                SweepPoint::RevenueModel { kind: RevenueKind::Linear, coefficient: 0.003 },
                SweepPoint::RevenueModel { kind: RevenueKind::Logistic, coefficient: 0.01 },
            ],
            SweepVariable::GpuCostFactor => [5.0, 10.0, 15.0, 20.0]
                .into_iter()
                .map(SweepPoint::GpuCostFactor)
                .collect(),
            SweepVariable::PopulationMix => DeviceClassName::ALL
                .into_iter()
                .map(SweepPoint::PopulationMix)
                .collect(),
            SweepVariable::QuittingParams => vec![
                SweepPoint::Quitting {
                    label: "interesting".to_string(),
                    session_quit: 0.10,
                    qoe_factor: 0.1,
                },
                SweepPoint::Quitting {
                    label: "default".to_string(),
                    session_quit: 0.20,
                    qoe_factor: 0.2,
                },
                SweepPoint::Quitting {
                    label: "boring".to_string(),
                    session_quit: 0.50,
                    qoe_factor: 0.5,
                },
                SweepPoint::Quitting {
                    label: "demanding".to_string(),
                    session_quit: 0.20,
                    qoe_factor: 0.5,
                },
            ],
        }
    }

    /// A sweep over the standard values with default base configuration.
    pub fn builtin(variable: SweepVariable, replications: u32, base_seed: u64) -> Self {
        SweepSpec {
            variable,
            points: Self::builtin_points(variable),
            replications,
            base_seed,
            session: SessionConfig::default(),
            pricing: PricingConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.points.is_empty() {
            return Err(Error::config("sweep needs at least one value"));
        }
        if self.replications < 1 {
            return Err(Error::config("sweep needs at least one replication"));
        }
        self.session.validate()?;
        self.pricing.validate()
    }
}

// ---------------------------------------------------------------------------
// Spec files
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSpecFile {
    variable: SweepVariable,
    values: Option<Vec<toml::Value>>,
    replications: Option<u32>,
    base_seed: Option<u64>,
    session: Option<SessionConfig>,
    pricing: Option<PricingConfig>,
}

fn parse_point(variable: SweepVariable, value: &toml::Value) -> Result<SweepPoint, Error> {
    let as_number = |v: &toml::Value| -> Option<f64> {
        v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
    };
    let bad = || Error::config(format!("invalid value {value:?} for {}", variable.as_str()));
    match variable {
        SweepVariable::ArrivalRate => Ok(SweepPoint::ArrivalRate(as_number(value).ok_or_else(bad)?)),
        SweepVariable::RevenueRate => Ok(SweepPoint::RevenueRate(as_number(value).ok_or_else(bad)?)),
        SweepVariable::GpuCostFactor => {
            Ok(SweepPoint::GpuCostFactor(as_number(value).ok_or_else(bad)?))
        }
        SweepVariable::GpuCount => {
            let n = value.as_integer().ok_or_else(bad)?;
            Ok(SweepPoint::GpuCount(u32::try_from(n).map_err(|_| bad())?))
        }
        SweepVariable::RevenueModel => {
            let (kind, coefficient) = match value.as_str().ok_or_else(bad)? {
                "constant" => (RevenueKind::Constant, 0.01),
                "linear" => (RevenueKind::Linear, 0.003),
                "logistic" => (RevenueKind::Logistic, 0.01),
                _ => return Err(bad()),
            };
            Ok(SweepPoint::RevenueModel { kind, coefficient })
        }
        SweepVariable::PopulationMix => {
            let name = value.as_str().ok_or_else(bad)?;
            let class = DeviceClassName::ALL
                .into_iter()
                .find(|c| c.as_str() == name)
                .ok_or_else(bad)?;
            Ok(SweepPoint::PopulationMix(class))
        }
        SweepVariable::QuittingParams => {
            let label = value.as_str().ok_or_else(bad)?;
            SweepSpec::quitting_preset(label).ok_or_else(bad)
        }
    }
}

impl SweepSpec {
    fn quitting_preset(label: &str) -> Option<SweepPoint> {
        Self::builtin_points(SweepVariable::QuittingParams)
            .into_iter()
            .find(|p| p.label() == label)
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, Error> {
        let file: SweepSpecFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        let points = match file.values {
            None => Self::builtin_points(file.variable),
            Some(values) => values
                .iter()
                .map(|v| parse_point(file.variable, v))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let spec = SweepSpec {
            variable: file.variable,
            points,
            replications: file.replications.unwrap_or(30),
            base_seed: file.base_seed.unwrap_or(42),
            session: file.session.unwrap_or_default(),
            pricing: file.pricing.unwrap_or_default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Mean and standard error of one metric across replications.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricStats {
    pub mean: f64,
    pub stderr: f64,
}

fn stats(samples: &[f64]) -> MetricStats {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return MetricStats { mean, stderr: 0.0 };
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    MetricStats { mean, stderr: (var / n).sqrt() }
}

/// Names and accessors of the aggregated metrics, in output order.
pub const METRICS: [&str; 7] = [
    "total_revenue",
    "node_cost",
    "traffic_cost",
    "profit",
    "mean_spectators",
    "mean_dqoe",
    "total_qoe",
];

fn metric_of(trace: &SessionTrace<f64>, metric: &str) -> f64 {
    match metric {
        "total_revenue" => trace.totals.revenue,
        "node_cost" => trace.totals.node_cost,
        "traffic_cost" => trace.totals.traffic_cost,
        "profit" => trace.totals.profit,
        "mean_spectators" => trace.totals.mean_spectators,
        "mean_dqoe" => trace.totals.mean_dqoe,
        "total_qoe" => trace.totals.total_qoe,
        _ => unreachable!("unknown metric"),
    }
}

/// Per-cell aggregate: one `MetricStats` per metric name.
#[derive(Debug, Clone, Default)]
pub struct CellStats {
    pub metrics: BTreeMap<&'static str, MetricStats>,
}

impl CellStats {
    pub fn get(&self, metric: &str) -> MetricStats {
        self.metrics[metric]
    }
}

/// Means and standard errors over a nonempty set of replication traces.
pub fn aggregate_replications(traces: &[SessionTrace<f64>]) -> Result<CellStats, Error> {
    if traces.is_empty() {
        return Err(Error::contract("cannot aggregate zero replications"));
    }
    let mut cell = CellStats::default();
    for metric in METRICS {
        let samples: Vec<f64> = traces.iter().map(|t| metric_of(t, metric)).collect();
        cell.metrics.insert(metric, stats(&samples));
    }
    Ok(cell)
}

/// Aggregated sweep output: one cell per (value, optimizer).
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub labels: Vec<String>,
    pub replications: u32,
    pub base_seed: u64,
    /// Indexed by value, then by optimizer.
    pub cells: Vec<BTreeMap<&'static str, CellStats>>,
    /// Per value: paired smart-minus-naive profit difference across
    /// replications (the seeds are shared, so this isolates the optimizer).
    pub profit_gap: Vec<MetricStats>,
}

impl SweepResult {
    pub fn cell(&self, value_idx: usize, optimizer: OptimizerKind) -> &CellStats {
        &self.cells[value_idx][optimizer.as_str()]
    }
}

const SWEEP_SEED_TAG: u64 = 0x53;

/// Seed for one (value, replication) cell; identical across optimizers so
/// both see the same arrival and fluctuation randomness.
pub fn replication_seed(base_seed: u64, value_idx: usize, replication: u32) -> u64 {
    derive_seed(base_seed, SWEEP_SEED_TAG, value_idx as u64, replication as u64)
}

/// Run the sweep: `replications` paired Smart/Naive sessions per value,
/// executed in parallel, aggregated in deterministic order.
pub fn run_sweep(spec: &SweepSpec, options: RunOptions) -> Result<SweepResult, Error> {
    spec.validate()?;
    let jobs: Vec<(usize, u32)> = (0..spec.points.len())
        .flat_map(|v| (0..spec.replications).map(move |r| (v, r)))
        .collect();

    let traces: Vec<Result<(SessionTrace<f64>, SessionTrace<f64>), Error>> = jobs
        .par_iter()
        .map(|&(value_idx, replication)| {
            let mut session = spec.session.clone();
            let mut pricing = spec.pricing.clone();
            spec.points[value_idx].apply(&mut session, &mut pricing);
            let seed = replication_seed(spec.base_seed, value_idx, replication);
            let smart = run_session(&session, &pricing, OptimizerKind::Smart, seed, options)?;
            let naive = run_session(&session, &pricing, OptimizerKind::Naive, seed, options)?;
            Ok((smart, naive))
        })
        .collect();

    let mut by_value: Vec<(Vec<SessionTrace<f64>>, Vec<SessionTrace<f64>>)> =
        (0..spec.points.len()).map(|_| (Vec::new(), Vec::new())).collect();
    for (&(value_idx, _), result) in jobs.iter().zip(traces) {
        let (smart, naive) = result?;
        by_value[value_idx].0.push(smart);
        by_value[value_idx].1.push(naive);
    }

    let mut cells = Vec::with_capacity(spec.points.len());
    let mut profit_gap = Vec::with_capacity(spec.points.len());
    for (smart_traces, naive_traces) in &by_value {
        let mut row = BTreeMap::new();
        row.insert(OptimizerKind::Smart.as_str(), aggregate_replications(smart_traces)?);
        row.insert(OptimizerKind::Naive.as_str(), aggregate_replications(naive_traces)?);
        cells.push(row);
        let gaps: Vec<f64> = smart_traces
            .iter()
            .zip(naive_traces)
            .map(|(s, n)| s.totals.profit - n.totals.profit)
            .collect();
        profit_gap.push(stats(&gaps));
    }

    Ok(SweepResult {
        variable: spec.variable,
        labels: spec.points.iter().map(|p| p.label()).collect(),
        replications: spec.replications,
        base_seed: spec.base_seed,
        cells,
        profit_gap,
    })
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

/// Long-format table: variable,value,optimizer,metric,mean,stderr.
pub fn long_csv(result: &SweepResult) -> String {
    let mut out = String::from("variable,value,optimizer,metric,mean,stderr\n");
    for (label, row) in result.labels.iter().zip(&result.cells) {
        for optimizer in [OptimizerKind::Smart, OptimizerKind::Naive] {
            let cell = &row[optimizer.as_str()];
            for metric in METRICS {
                let s = cell.get(metric);
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    result.variable.as_str(),
                    label,
                    optimizer.as_str(),
                    metric,
                    format_sig6(s.mean),
                    format_sig6(s.stderr),
                ));
            }
        }
    }
    out
}

/// Wide plot table: one row per sweep value, smart/naive means side by
/// side, ready for bar-plus-line plotting.
pub fn plot_csv(result: &SweepResult) -> String {
    let mut out = String::from("value");
    for metric in METRICS {
        for optimizer in [OptimizerKind::Smart, OptimizerKind::Naive] {
            out.push_str(&format!(",{}_{}", optimizer.as_str(), metric));
        }
    }
    out.push('\n');
    for (label, row) in result.labels.iter().zip(&result.cells) {
        out.push_str(label);
        for metric in METRICS {
            for optimizer in [OptimizerKind::Smart, OptimizerKind::Naive] {
                out.push_str(&format!(",{}", format_sig6(row[optimizer.as_str()].get(metric).mean)));
            }
        }
        out.push('\n');
    }
    out
}

/// Write the long-format and plot CSVs under `dir`.
pub fn write_outputs(result: &SweepResult, dir: &Path) -> Result<(), Error> {
    write_file(&dir.join("sweep_long.csv"), &long_csv(result))?;
    write_file(
        &dir.join(format!("plot_{}.csv", result.variable.as_str())),
        &plot_csv(result),
    )
}
