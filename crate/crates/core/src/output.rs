//! Deterministic text output: per-step CSV, session summaries, and the
//! float formatting shared by the sweep writers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::OptimizerKind;
use crate::error::Error;
use crate::scalar::Scalar;
use crate::simulator::SessionTrace;

/// Format with six significant digits; byte-stable for a given value.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&magnitude) {
        format!("{x:.5e}")
    } else {
        let decimals = (5 - magnitude).max(0) as usize;
        format!("{x:.decimals$}")
    }
}

/// Per-step CSV for one session trace. Profile lists are joined with `;`
/// so the file stays comma-clean.
pub fn steps_csv<S: Scalar>(trace: &SessionTrace<S>) -> String {
    let players = trace.steps.first().map_or(2, |m| m.active_profiles.len());
    let mut out = String::from("step,spectators,arrivals,quits,revenue,node_cost,traffic_cost,profit,mean_qoe,mean_dqoe");
    for k in 1..=players {
        out.push_str(&format!(",active_profiles_p{k}"));
    }
    out.push('\n');
    for m in &trace.steps {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}",
            m.step,
            m.spectators,
            m.arrivals,
            m.quits,
            m.revenue,
            m.node_cost,
            m.traffic_cost,
            m.profit,
            m.mean_qoe,
            m.mean_dqoe
        ));
        for names in &m.active_profiles {
            out.push(',');
            out.push_str(&names.join(";"));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
struct Summary<S: Scalar> {
    seed: u64,
    optimizer: OptimizerKind,
    steps: u32,
    total_revenue: S,
    total_node_cost: S,
    total_traffic_cost: S,
    total_profit: S,
    mean_spectators: S,
    mean_qoe: S,
    mean_dqoe: S,
    total_qoe: S,
    final_spectators: u32,
}

/// Session totals as a small structured text record.
pub fn summary_text<S: Scalar>(trace: &SessionTrace<S>) -> String {
    let summary = Summary {
        seed: trace.seed,
        optimizer: trace.optimizer,
        steps: trace.steps.len() as u32,
        total_revenue: trace.totals.revenue,
        total_node_cost: trace.totals.node_cost,
        total_traffic_cost: trace.totals.traffic_cost,
        total_profit: trace.totals.profit,
        mean_spectators: trace.totals.mean_spectators,
        mean_qoe: trace.totals.mean_qoe,
        mean_dqoe: trace.totals.mean_dqoe,
        total_qoe: trace.totals.total_qoe,
        final_spectators: trace.totals.final_spectators,
    };
    toml::to_string(&summary).expect("summary serialization cannot fail")
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    std::fs::write(path, contents).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
