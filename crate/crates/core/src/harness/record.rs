//! Trajectory records and their file exports.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One recorded iteration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricRow {
    pub k: usize,
    pub v: f64,
    pub f: f64,
    pub consensus_error: f64,
    pub max_grad_norm: f64,
    pub lyap_grad_norm: f64,
}

/// Best-minus-worst per-agent metric over the trailing window.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DegreeOfConsensus {
    pub best_agent_metric: f64,
    pub worst_agent_metric: f64,
    pub gap: f64,
    /// Recorded points averaged over.
    pub window: usize,
    /// Standard deviation of the across-agent mean metric inside the
    /// window; reported, never asserted.
    pub fluctuation: f64,
}

impl DegreeOfConsensus {
    /// `series[i][j]` is agent j's metric at recorded point i. The window is
    /// min(100, 20% of the recorded points), at least 1.
    pub fn from_series(series: &[Vec<f64>]) -> Option<DegreeOfConsensus> {
        if series.is_empty() || series[0].is_empty() {
            return None;
        }
        let window = (series.len() / 5).clamp(1, 100).min(series.len());
        let tail = &series[series.len() - window..];
        let n_agents = tail[0].len();
        let mut per_agent = vec![0.0; n_agents];
        for row in tail {
            for (acc, &m) in per_agent.iter_mut().zip(row.iter()) {
                *acc += m;
            }
        }
        for acc in &mut per_agent {
            *acc /= window as f64;
        }
        let best = per_agent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let worst = per_agent.iter().copied().fold(f64::INFINITY, f64::min);
        let means: Vec<f64> = tail
            .iter()
            .map(|row| row.iter().sum::<f64>() / n_agents as f64)
            .collect();
        let grand = means.iter().sum::<f64>() / means.len() as f64;
        let fluctuation =
            (means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / means.len() as f64).sqrt();
        Some(DegreeOfConsensus {
            best_agent_metric: best,
            worst_agent_metric: worst,
            gap: best - worst,
            window,
            fluctuation,
        })
    }
}

/// Full record of one trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub master_seed: u64,
    pub config_hash: String,
    pub rows: Vec<MetricRow>,
    /// Per-agent metric (accuracy when labels exist, else negated loss) at
    /// every recorded point.
    pub agent_metrics: Vec<Vec<f64>>,
    pub degree_of_consensus: Option<DegreeOfConsensus>,
    /// Trajectory-empirical per-agent gradient-norm bound (max + 10%).
    pub h_empirical: f64,
    /// Trajectory-empirical Lyapunov-gradient bound (max + 10%).
    pub g_empirical: f64,
    pub wall_clock_ms: u128,
    /// Set when the run aborted; rows up to the abort are kept.
    pub diverged: Option<String>,
    /// (iteration, full state) pairs for recomputation audits.
    #[serde(skip)]
    pub checkpoints: Vec<(usize, Array2<f64>)>,
    #[serde(skip)]
    pub final_theta: Option<Array2<f64>>,
}

impl RunRecord {
    pub fn final_row(&self) -> Option<&MetricRow> {
        self.rows.last()
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("k,V,F,consensus_error,max_grad_norm,lyap_grad_norm\n");
        for r in &self.rows {
            // default f64 formatting is shortest-roundtrip, so the bytes are
            // a pure function of the values
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.k, r.v, r.f, r.consensus_error, r.max_grad_norm, r.lyap_grad_norm
            )
            .expect("string write");
        }
        out
    }

    pub fn write_metrics_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.metrics_csv())?;
        Ok(())
    }

    /// Plot-ready two-column files, one per curve.
    pub fn write_dat_files(&self, dir: &Path) -> Result<()> {
        let curves: [(&str, fn(&MetricRow) -> f64); 4] = [
            ("v.dat", |r| r.v),
            ("f.dat", |r| r.f),
            ("consensus_error.dat", |r| r.consensus_error),
            ("lyap_grad_norm.dat", |r| r.lyap_grad_norm),
        ];
        for (name, pick) in curves {
            let mut out = String::new();
            for r in &self.rows {
                writeln!(out, "{} {}", r.k, pick(r)).expect("string write");
            }
            std::fs::write(dir.join(name), out)?;
        }
        Ok(())
    }
}
