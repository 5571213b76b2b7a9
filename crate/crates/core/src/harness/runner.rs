//! Executes a configured run and records the trajectory.

use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::algorithms::{step, SwarmState};
use crate::analysis::{consensus_error, lyapunov_gradient, lyapunov_value};
use crate::error::{Error, Result};
use crate::harness::config::{lyapunov_spec_for, Experiment, InitChoice, RunConfig};
use crate::harness::record::{DegreeOfConsensus, MetricRow, RunRecord};
use crate::rng;

/// Full-state checkpoints are kept at this stride.
pub const CHECKPOINT_EVERY: usize = 50;

/// Runs the configured experiment once with the configured master seed.
pub fn run(cfg: &RunConfig) -> Result<RunRecord> {
    let exp = cfg.build()?;
    run_experiment(&exp, cfg, cfg.run.master_seed)
}

/// Runs `run.replicas` independent trajectories in parallel. Replica i uses
/// a seed derived from the master seed, so replicas never share draws and
/// the set of records is reproducible.
pub fn run_replicas(cfg: &RunConfig) -> Result<Vec<RunRecord>> {
    let seeds: Vec<u64> = (0..cfg.run.replicas)
        .map(|i| {
            if i == 0 {
                cfg.run.master_seed
            } else {
                rng::derive_seed(cfg.run.master_seed, i as u64)
            }
        })
        .collect();
    seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.run.master_seed = seed;
            let exp = c.build()?;
            run_experiment(&exp, &c, seed)
        })
        .collect()
}

/// Runs one trajectory over an already-built experiment. Divergence does not
/// error out; the partial record comes back with `diverged` set.
pub fn run_experiment(exp: &Experiment, cfg: &RunConfig, seed: u64) -> Result<RunRecord> {
    let start = Instant::now();
    let spec = lyapunov_spec_for(exp.kind, &exp.hp)?;
    let n = exp.obj.n_agents();
    let d = exp.obj.dimension();

    let theta0 = match cfg.run.init {
        InitChoice::Zeros => Array2::zeros((n, d)),
        InitChoice::Gaussian => {
            let mut r = ChaCha8Rng::seed_from_u64(rng::derive_seed(seed, 0x696e_6974));
            Array2::from_shape_fn((n, d), |_| {
                let z: f64 = StandardNormal.sample(&mut r);
                z * cfg.run.init_scale
            })
        }
    };
    let mut state = SwarmState::new(theta0);

    let mut rows = Vec::new();
    let mut agent_metrics = Vec::new();
    let mut checkpoints = Vec::new();
    let mut h_max = 0.0_f64;
    let mut g_max = 0.0_f64;
    let mut diverged = None;

    let record = |state: &SwarmState,
                  rows: &mut Vec<MetricRow>,
                  agent_metrics: &mut Vec<Vec<f64>>,
                  h_max: &mut f64,
                  g_max: &mut f64|
     -> Result<()> {
        let v = lyapunov_value(&state.theta, &exp.obj, &exp.pi, &spec)?;
        let f = exp.obj.total_loss(&state.theta)?;
        let grad = exp.obj.full_gradient_matrix(&state.theta)?;
        let max_grad_norm = (0..n)
            .map(|j| grad.row(j).dot(&grad.row(j)).sqrt())
            .fold(0.0, f64::max);
        let lg = lyapunov_gradient(&state.theta, &exp.obj, &exp.pi, &spec)?;
        let lyap_grad_norm = lg.iter().map(|x| x * x).sum::<f64>().sqrt();
        rows.push(MetricRow {
            k: state.k,
            v,
            f,
            consensus_error: consensus_error(&state.theta),
            max_grad_norm,
            lyap_grad_norm,
        });
        *h_max = h_max.max(max_grad_norm);
        *g_max = g_max.max(lyap_grad_norm);
        let metrics: Vec<f64> = (0..n)
            .map(|j| agent_metric(exp, state.theta.row(j)))
            .collect::<Result<_>>()?;
        agent_metrics.push(metrics);
        Ok(())
    };

    record(
        &state,
        &mut rows,
        &mut agent_metrics,
        &mut h_max,
        &mut g_max,
    )?;
    checkpoints.push((0, state.theta.clone()));

    for k in 0..cfg.run.iterations {
        match step(exp.kind, &state, &exp.pi, &exp.obj, &exp.hp, seed) {
            Ok((next, _stats)) => state = next,
            Err(e @ Error::Divergence { .. }) => {
                diverged = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
        let done = k + 1 == cfg.run.iterations;
        if state.k % cfg.run.record_every == 0 || done {
            record(
                &state,
                &mut rows,
                &mut agent_metrics,
                &mut h_max,
                &mut g_max,
            )?;
        }
        if state.k % CHECKPOINT_EVERY == 0 || done {
            checkpoints.push((state.k, state.theta.clone()));
        }
    }

    let degree = DegreeOfConsensus::from_series(&agent_metrics);
    Ok(RunRecord {
        algorithm: exp.kind.name().to_string(),
        master_seed: seed,
        config_hash: exp.config_hash.clone(),
        rows,
        agent_metrics,
        degree_of_consensus: degree,
        h_empirical: 1.1 * h_max,
        g_empirical: 1.1 * g_max,
        wall_clock_ms: start.elapsed().as_millis(),
        diverged,
        checkpoints,
        final_theta: Some(state.theta),
    })
}

/// Agent-level performance: classification accuracy on the whole dataset
/// when one exists, otherwise negated local loss (so higher is better for
/// every objective kind).
fn agent_metric(exp: &Experiment, row: ndarray::ArrayView1<'_, f64>) -> Result<f64> {
    if let Some(data) = &exp.data {
        if let Some(acc) = exp.obj.accuracy(row, &data.x, &data.y) {
            return Ok(acc);
        }
    }
    let n = exp.obj.n_agents();
    let mut total = 0.0;
    for j in 0..n {
        total += exp.obj.eval(j, row)?;
    }
    Ok(-total)
}

/// Writes metrics.csv, summary.json, and the per-curve .dat files.
pub fn write_run_outputs(rec: &RunRecord, dir: &Path) -> Result<()> {
    write_run_outputs_with_bounds(rec, None, dir)
}

/// Same, with the closed-form bound report for the configured algorithm
/// folded into summary.json when one exists.
pub fn write_run_outputs_with_bounds(
    rec: &RunRecord,
    bound_report: Option<&crate::analysis::BoundReport>,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    rec.write_metrics_csv(&dir.join("metrics.csv"))?;
    rec.write_dat_files(dir)?;
    let mut json = serde_json::to_value(rec)?;
    if let Some(b) = bound_report {
        json["bound_report"] = serde_json::to_value(b)?;
    }
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&json)?,
    )?;
    Ok(())
}
