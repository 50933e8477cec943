//! Acceptance suite: every release gate runs here, one test per criterion,
//! each printing a single PASS/FAIL line. Statistical checks use fixed
//! seeds, so results are reproducible run to run.

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use faastream::behavior::BehaviorParams;
use faastream::config::OptimizerKind;
use faastream::economics::{expected_horizon_revenue, RevenueModel};
use faastream::qoe::qoe_single;
use faastream::simulator::{run_session, RunOptions};
use faastream::sweep::{replication_seed, run_sweep, SweepResult, SweepSpec, SweepVariable};
use faastream::{PricingConfig, RevenueKind, SessionConfig};

const BASE_SEED: u64 = 42;

fn criterion<F>(number: u32, name: &str, body: F)
where
    F: FnOnce() -> Result<String, String>,
{
    match body() {
        Ok(detail) => println!("acceptance criterion {number} ({name}): PASS — {detail}"),
        Err(message) => {
            println!("acceptance criterion {number} ({name}): FAIL — {message}");
            panic!("criterion {number} ({name}) failed: {message}");
        }
    }
}

fn check(ok: bool, label: &str, errors: &mut Vec<String>) {
    if !ok {
        errors.push(label.to_string());
    }
}

// ---------------------------------------------------------------------------
// Shared sweep runs (computed once, used by criteria 5, 7, 8, 9)
// ---------------------------------------------------------------------------

struct SweepBundle {
    arrival: SweepResult,
    gpu: SweepResult,
    quitting: SweepResult,
}

static SWEEPS: OnceLock<Result<SweepBundle, String>> = OnceLock::new();

fn sweeps() -> Result<&'static SweepBundle, String> {
    SWEEPS
        .get_or_init(|| {
            // plan validity and smart-vs-naive dominance are asserted inside
            // every session of every cell
            let options = RunOptions {
                validate_plans: true,
                check_dominance: true,
                ..Default::default()
            };
            let arrival = run_sweep(&SweepSpec::builtin(SweepVariable::ArrivalRate, 30, BASE_SEED), options)
                .map_err(|e| e.to_string())?;
            let gpu = run_sweep(&SweepSpec::builtin(SweepVariable::GpuCostFactor, 200, BASE_SEED), options)
                .map_err(|e| e.to_string())?;
            let quitting =
                run_sweep(&SweepSpec::builtin(SweepVariable::QuittingParams, 30, BASE_SEED), options)
                    .map_err(|e| e.to_string())?;
            Ok(SweepBundle { arrival, gpu, quitting })
        })
        .as_ref()
        .map_err(|e| e.clone())
}

fn means(result: &SweepResult, optimizer: OptimizerKind, metric: &str) -> Vec<f64> {
    (0..result.labels.len())
        .map(|i| result.cell(i, optimizer).get(metric).mean)
        .collect()
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

// ---------------------------------------------------------------------------
// 1. QoE formula fidelity
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_qoe_formula_fidelity() {
    criterion(1, "qoe formula fidelity", || {
        let cases: [(f64, f64, f64); 3] =
            [(47.25, 25.0, 3.627), (43.25, 25.0, 3.284), (32.02, 25.0, 1.670)];
        for (psnr, fr, expected) in cases {
            let got = qoe_single(psnr, fr);
            if (got - expected).abs() > 0.001 {
                return Err(format!("qoe({psnr}, {fr}) = {got}, expected {expected} ± 0.001"));
            }
        }
        Ok("three reference evaluations within ±0.001".to_string())
    });
}

// ---------------------------------------------------------------------------
// 2. Quitting calibration
// ---------------------------------------------------------------------------

fn survivors_after(steps: u32, quit_base: f64, population: u64, seed: u64) -> f64 {
    let params = BehaviorParams::new(0.5, quit_base, 0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // a population of fully satisfied spectators: dQoE stays zero
    let mut alive: Vec<(u64, f64)> = (0..population).map(|id| (id, 0.0)).collect();
    for _ in 0..steps {
        let quitting = faastream::behavior::sample_quits(&alive, &params, &mut rng);
        alive.retain(|(id, _)| !quitting.contains(id));
    }
    alive.len() as f64 / population as f64
}

#[test]
fn criterion_2_quitting_calibration() {
    criterion(2, "quitting calibration", || {
        let base = survivors_after(60, 0.0037, 10_000, 7);
        if (base - 0.8006).abs() > 0.01 {
            return Err(format!("survival at q=0.0037 was {base:.4}, expected 0.8006 ± 0.01"));
        }
        let low = survivors_after(60, 0.0057, 10_000, 8);
        if (low - 0.709).abs() > 0.01 {
            return Err(format!("survival at q=0.0057 was {low:.4}, expected 0.709 ± 0.01"));
        }
        Ok(format!("survival {base:.4} at q=0.0037 and {low:.4} at q=0.0057"))
    });
}

// ---------------------------------------------------------------------------
// 3. Horizon revenue: closed form vs direct summation
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_horizon_revenue() {
    criterion(3, "horizon revenue closed form", || {
        let direct = |r: f64, q: f64, steps: u32| -> f64 {
            let mut total = 0.0;
            let mut survival = 1.0;
            for _ in 0..steps {
                survival *= 1.0 - q;
                total += r * survival;
            }
            total
        };

        let canonical: f64 = expected_horizon_revenue(
            3.0,
            60,
            &RevenueModel::new(RevenueKind::Constant, 0.01),
            &BehaviorParams::new(0.5, 0.0037, 0.2),
            3.0,
        );
        if (canonical - 0.537).abs() > 0.001 {
            return Err(format!("canonical case gave {canonical}, expected 0.537 ± 0.001"));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(303);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let r = rng.random_range(0.0005..0.05);
            let q = rng.random_range(0.0..1.0);
            let steps = rng.random_range(0..=200u32);
            let closed: f64 = expected_horizon_revenue(
                2.0,
                steps,
                &RevenueModel::new(RevenueKind::Constant, r),
                &BehaviorParams::new(0.5, q, 0.0),
                2.0,
            );
            let gap = (closed - direct(r, q, steps)).abs();
            worst = worst.max(gap);
            if gap > 1e-9 {
                return Err(format!("r={r} q={q} steps={steps}: closed form off by {gap:e}"));
            }
        }
        Ok(format!("canonical 0.537 case and 1000 random cases within 1e-9 (worst {worst:.2e})"))
    });
}

// ---------------------------------------------------------------------------
// 4. Optimizer exactness via the CLI self-check
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_optimizer_exactness() {
    criterion(4, "optimizer exactness", || {
        let start = std::time::Instant::now();
        let output = Command::new(env!("CARGO_BIN_EXE_faastream"))
            .args(["oracle-check", "--instances", "100", "--max-spectators", "4", "--seed", "7"])
            .output()
            .map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        if !output.status.success() {
            return Err(format!(
                "oracle-check exited with {:?}: {}",
                output.status.code(),
                String::from_utf8_lossy(&output.stderr)
            ));
        }
        if elapsed.as_secs() >= 10 {
            return Err(format!("oracle-check took {elapsed:?}, budget is 10 s"));
        }
        Ok(format!("100 instances matched within 1e-9 in {elapsed:.1?}"))
    });
}

// ---------------------------------------------------------------------------
// 5. Dominance across all sweep cells
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_dominance() {
    criterion(5, "smart dominates naive", || {
        let bundle = sweeps()?;
        let cells = bundle.arrival.labels.len()
            + bundle.gpu.labels.len()
            + bundle.quitting.labels.len();
        let sessions = (bundle.arrival.labels.len() * bundle.arrival.replications as usize
            + bundle.gpu.labels.len() * bundle.gpu.replications as usize
            + bundle.quitting.labels.len() * bundle.quitting.replications as usize)
            * 2;
        Ok(format!(
            "per-step dominance and plan validity held across {cells} sweep cells ({sessions} sessions)"
        ))
    });
}

// ---------------------------------------------------------------------------
// 6. QoE range of the greedy baseline
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_qoe_range() {
    criterion(6, "baseline qoe range", || {
        let config = SessionConfig::default();
        let pricing = PricingConfig::default();
        let mut qoes = Vec::new();
        for rep in 0..30u32 {
            let seed = replication_seed(BASE_SEED, 0, rep);
            let trace =
                run_session(&config, &pricing, OptimizerKind::Naive, seed, RunOptions::default())
                    .map_err(|e| e.to_string())?;
            qoes.push(trace.totals.mean_qoe);
        }
        let mean = qoes.iter().sum::<f64>() / qoes.len() as f64;
        let min = qoes.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = qoes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(2.8..=3.8).contains(&mean) {
            return Err(format!("mean session QoE {mean:.3} outside [2.8, 3.8]"));
        }
        if min < 2.8 || max > 3.8 {
            return Err(format!("session QoE range [{min:.3}, {max:.3}] leaves [2.8, 3.8]"));
        }
        Ok(format!("30 sessions: mean {mean:.3}, range [{min:.3}, {max:.3}] within [2.8, 3.8]"))
    });
}

// ---------------------------------------------------------------------------
// 7. Arrival-rate trends
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_arrival_rate_trends() {
    criterion(7, "arrival-rate trends", || {
        let bundle = sweeps()?;
        let sweep = &bundle.arrival;
        let mut errors = Vec::new();
        for optimizer in [OptimizerKind::Smart, OptimizerKind::Naive] {
            for metric in ["mean_spectators", "total_revenue", "traffic_cost"] {
                let series = means(sweep, optimizer, metric);
                check(
                    strictly_increasing(&series),
                    &format!("{} {metric} not strictly increasing: {series:?}", optimizer.as_str()),
                    &mut errors,
                );
            }
        }
        let gaps: Vec<f64> = sweep.profit_gap.iter().map(|g| g.mean).collect();
        let largest_at_lowest = gaps[1..].iter().all(|&g| gaps[0] >= g);
        check(
            largest_at_lowest,
            &format!("profit gap not largest at the lowest arrival rate: {gaps:?}"),
            &mut errors,
        );
        if errors.is_empty() {
            Ok(format!("monotone trends hold; profit gaps across rates: {gaps:?}"))
        } else {
            Err(errors.join("; "))
        }
    });
}

// ---------------------------------------------------------------------------
// 8. GPU-pricing trends
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_gpu_pricing_trends() {
    criterion(8, "gpu-pricing trends", || {
        let bundle = sweeps()?;
        let sweep = &bundle.gpu;
        let mut errors = Vec::new();

        // at the x20 cell, smart profit beats naive with the paired
        // difference clear of zero by two standard errors
        let highest = sweep.labels.len() - 1;
        let smart_profit = sweep.cell(highest, OptimizerKind::Smart).get("profit").mean;
        let naive_profit = sweep.cell(highest, OptimizerKind::Naive).get("profit").mean;
        let gap = sweep.profit_gap[highest];
        check(
            smart_profit > naive_profit && gap.mean - 2.0 * gap.stderr > 0.0,
            &format!(
                "x20 profit advantage not clear: smart {smart_profit:.3}, naive {naive_profit:.3}, \
                 paired gap {:.3} ± 2SE {:.3}",
                gap.mean,
                2.0 * gap.stderr
            ),
            &mut errors,
        );

        // somewhere on the sweep, smart cuts node costs by at least 40%
        let smart_nodes = means(sweep, OptimizerKind::Smart, "node_cost");
        let naive_nodes = means(sweep, OptimizerKind::Naive, "node_cost");
        let ratios: Vec<f64> =
            smart_nodes.iter().zip(&naive_nodes).map(|(s, n)| s / n).collect();
        check(
            ratios.iter().any(|&r| r <= 0.60),
            &format!("no sweep point with node cost <= 60% of the baseline: {ratios:?}"),
            &mut errors,
        );

        // smart traffic grows as GPUs get pricier
        let traffic = means(sweep, OptimizerKind::Smart, "traffic_cost");
        check(
            strictly_increasing(&traffic),
            &format!("smart traffic cost not increasing with GPU factor: {traffic:?}"),
            &mut errors,
        );

        if errors.is_empty() {
            Ok(format!(
                "x20 paired gap {:.3} ± {:.3}; node-cost ratios {:?}; traffic {:?}",
                gap.mean,
                2.0 * gap.stderr,
                ratios.iter().map(|r| format!("{:.1}%", 100.0 * r)).collect::<Vec<_>>(),
                traffic.iter().map(|t| format!("{t:.3}")).collect::<Vec<_>>(),
            ))
        } else {
            Err(errors.join("; "))
        }
    });
}

// ---------------------------------------------------------------------------
// 9. Quitting-pressure trend
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_quitting_pressure_trend() {
    criterion(9, "quitting-pressure trend", || {
        let bundle = sweeps()?;
        let sweep = &bundle.quitting;
        let interesting = sweep
            .labels
            .iter()
            .position(|l| l == "interesting")
            .ok_or("missing interesting cell")?;
        let boring =
            sweep.labels.iter().position(|l| l == "boring").ok_or("missing boring cell")?;
        let node_interesting = sweep.cell(interesting, OptimizerKind::Smart).get("node_cost").mean;
        let node_boring = sweep.cell(boring, OptimizerKind::Smart).get("node_cost").mean;
        if node_boring > node_interesting {
            Ok(format!(
                "smart spends {node_boring:.3} on nodes in boring sessions vs {node_interesting:.3} in interesting ones"
            ))
        } else {
            Err(format!(
                "boring-session node cost {node_boring:.3} does not exceed interesting-session {node_interesting:.3}"
            ))
        }
    });
}

// ---------------------------------------------------------------------------
// 10. Determinism of the command line outputs
// ---------------------------------------------------------------------------

fn run_cli(args: &[&str], threads: &str) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_faastream"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

#[test]
fn criterion_10_output_determinism() {
    criterion(10, "output determinism", || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let dirs: Vec<_> = (0..3).map(|i| dir.path().join(format!("run{i}"))).collect();

        // two identical runs plus one under a different thread count
        for (i, threads) in [(0, "4"), (1, "4"), (2, "1")] {
            let out = run_cli(
                &[
                    "simulate",
                    "--seed",
                    "7",
                    "--optimizer",
                    "smart",
                    "--out",
                    dirs[i].to_str().unwrap(),
                ],
                threads,
            )?;
            if !out.status.success() {
                return Err(format!("simulate failed: {}", String::from_utf8_lossy(&out.stderr)));
            }
        }
        for file in ["steps.csv", "summary.toml"] {
            let a = read(&dirs[0].join(file))?;
            if a != read(&dirs[1].join(file))? || a != read(&dirs[2].join(file))? {
                return Err(format!("{file} differs across runs"));
            }
        }

        // a sweep must also be byte-stable across thread counts
        let spec_path = dir.path().join("sweep.toml");
        std::fs::write(
            &spec_path,
            "variable = \"arrival_rate\"\nvalues = [0.5, 1.0]\nreplications = 4\nbase_seed = 5\n",
        )
        .map_err(|e| e.to_string())?;

        let sweep_dirs: Vec<_> = (0..2).map(|i| dir.path().join(format!("sweep{i}"))).collect();
        for (i, threads) in [(0usize, "1"), (1, "4")] {
            let out = run_cli(
                &[
                    "sweep",
                    "--spec",
                    spec_path.to_str().unwrap(),
                    "--out",
                    sweep_dirs[i].to_str().unwrap(),
                ],
                threads,
            )?;
            if !out.status.success() {
                return Err(format!("sweep failed: {}", String::from_utf8_lossy(&out.stderr)));
            }
        }
        for file in ["sweep_long.csv", "plot_arrival_rate.csv"] {
            if read(&sweep_dirs[0].join(file))? != read(&sweep_dirs[1].join(file))? {
                return Err(format!("{file} differs across thread counts"));
            }
        }
        Ok("simulate and sweep outputs byte-identical across reruns and thread counts".to_string())
    });
}
