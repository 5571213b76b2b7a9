//! Multi-run operations: side-by-side comparison, parameter sweeps, and
//! bound-versus-measurement reports.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::algorithms::{max_step_size, AlgorithmKind};
use crate::analysis::BoundReport;
use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::record::RunRecord;
use crate::harness::runner::{run, write_run_outputs};

/// One algorithm entry in a comparison: a kind plus optional hyper-parameter
/// overrides, parsed from `kind` or `kind:key=val,key=val`.
#[derive(Debug, Clone)]
pub struct AlgorithmSpec {
    pub kind: AlgorithmKind,
    pub alpha: Option<f64>,
    pub omega: Option<f64>,
    pub tau: Option<usize>,
    pub mu: Option<f64>,
    pub label: String,
}

impl FromStr for AlgorithmSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind_str, rest) = match s.split_once(':') {
            Some((k, r)) => (k, Some(r)),
            None => (s, None),
        };
        let kind = AlgorithmKind::from_str(kind_str)?;
        let mut spec = AlgorithmSpec {
            kind,
            alpha: None,
            omega: None,
            tau: None,
            mu: None,
            label: s.to_string(),
        };
        if let Some(rest) = rest {
            for pair in rest.split(',') {
                let (key, val) = pair.split_once('=').ok_or_else(|| {
                    Error::InvalidConfig(format!("expected key=value in spec, got '{pair}'"))
                })?;
                let bad = |_| Error::InvalidConfig(format!("bad value for {key}: '{val}'"));
                match key.trim() {
                    "alpha" => spec.alpha = Some(val.parse().map_err(bad)?),
                    "omega" => spec.omega = Some(val.parse().map_err(bad)?),
                    "mu" => spec.mu = Some(val.parse().map_err(bad)?),
                    "tau" => {
                        spec.tau = Some(val.parse().map_err(|_| {
                            Error::InvalidConfig(format!("bad value for tau: '{val}'"))
                        })?)
                    }
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "unknown override '{other}' (use alpha, omega, tau, mu)"
                        )))
                    }
                }
            }
        }
        Ok(spec)
    }
}

impl AlgorithmSpec {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.algorithm.kind = self.kind;
        if let Some(a) = self.alpha {
            cfg.algorithm.alpha = a;
        }
        if let Some(w) = self.omega {
            cfg.algorithm.omega = w;
        }
        if let Some(t) = self.tau {
            cfg.algorithm.tau = t;
        }
        if let Some(m) = self.mu {
            cfg.algorithm.mu = m;
        }
    }

    /// Label usable as a directory name.
    pub fn slug(&self) -> String {
        self.label
            .chars()
            .map(|c| {
                if c.is_alphanumeric() || c == '-' || c == '.' {
                    c
                } else {
                    '_'
                }
            })
            .collect()
    }
}

/// Aligned records from running several algorithms on the same topology,
/// objective, partition, and seed.
#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub labels: Vec<String>,
    pub records: Vec<RunRecord>,
}

/// Runs every spec against the base configuration. Only the algorithm
/// section changes between runs, so the data, partition, and seed are
/// shared.
pub fn compare(cfg: &RunConfig, specs: &[AlgorithmSpec]) -> Result<CompareReport> {
    if specs.is_empty() {
        return Err(Error::InvalidConfig(
            "compare needs at least one algorithm".into(),
        ));
    }
    let mut labels = Vec::with_capacity(specs.len());
    let mut records = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut c = cfg.clone();
        spec.apply(&mut c);
        records.push(run(&c)?);
        labels.push(spec.label.clone());
    }
    Ok(CompareReport { labels, records })
}

impl CompareReport {
    /// Wide CSV with one loss and one consensus-error column per algorithm,
    /// aligned on recorded iteration. Rows stop at the shortest record.
    pub fn aligned_csv(&self) -> String {
        let mut head = String::from("k");
        for l in &self.labels {
            write!(head, ",F[{l}],consensus_error[{l}]").expect("string write");
        }
        head.push('\n');
        let n_rows = self.records.iter().map(|r| r.rows.len()).min().unwrap_or(0);
        let mut out = head;
        for i in 0..n_rows {
            write!(out, "{}", self.records[0].rows[i].k).expect("string write");
            for r in &self.records {
                write!(out, ",{},{}", r.rows[i].f, r.rows[i].consensus_error)
                    .expect("string write");
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, dir: &Path, specs: &[AlgorithmSpec]) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("compare.csv"), self.aligned_csv())?;
        let summary: Vec<serde_json::Value> = self
            .labels
            .iter()
            .zip(&self.records)
            .map(|(l, r)| {
                serde_json::json!({
                    "label": l,
                    "final": r.final_row(),
                    "degree_of_consensus": r.degree_of_consensus,
                    "diverged": r.diverged,
                })
            })
            .collect();
        std::fs::write(
            dir.join("compare.json"),
            serde_json::to_string_pretty(&summary)?,
        )?;
        for (spec, rec) in specs.iter().zip(&self.records) {
            write_run_outputs(rec, &dir.join(spec.slug()))?;
        }
        Ok(())
    }
}

/// Hyper-parameter swept over a run series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    Alpha,
    Omega,
    Tau,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(SweepParam::Alpha),
            "omega" => Ok(SweepParam::Omega),
            "tau" => Ok(SweepParam::Tau),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep parameter '{other}' (use alpha, omega, or tau)"
            ))),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Omega => "omega",
            SweepParam::Tau => "tau",
        }
    }

    fn validate(self, v: f64) -> Result<()> {
        let ok = match self {
            SweepParam::Alpha => v > 0.0 && v.is_finite(),
            SweepParam::Omega => v > 0.0 && v <= 1.0,
            SweepParam::Tau => v >= 1.0 && v.fract() == 0.0 && v <= 1e6,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid {} value {v}",
                self.name()
            )))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub value: f64,
    /// Largest admissible step size for this setting, when constants exist.
    pub admissible_alpha_max: Option<f64>,
    /// True when the configured alpha sits above the admissible maximum.
    pub alpha_exceeds_bound: Option<bool>,
    pub final_v: f64,
    pub final_f: f64,
    pub final_consensus_error: f64,
    pub consensus_gap: Option<f64>,
    pub diverged: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub entries: Vec<SweepEntry>,
}

/// Runs the base configuration once per value. All values are checked
/// before anything runs; one bad value rejects the whole sweep.
pub fn sweep(cfg: &RunConfig, param: SweepParam, values: &[f64]) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep needs at least one value".into(),
        ));
    }
    for &v in values {
        param.validate(v)?;
    }
    let mut entries = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = cfg.clone();
        match param {
            SweepParam::Alpha => c.algorithm.alpha = v,
            SweepParam::Omega => c.algorithm.omega = v,
            SweepParam::Tau => c.algorithm.tau = v as usize,
        }
        let exp = c.build()?;
        let (admissible_alpha_max, alpha_exceeds_bound) = match exp.obj.constants() {
            Ok(constants) => match max_step_size(
                exp.kind,
                &exp.pi,
                &constants,
                &exp.hp,
                exp.lambda_n_tau_variant,
            ) {
                Ok(bound) => (Some(bound), Some(exp.hp.alpha > bound)),
                Err(Error::NoAdmissibleStepSize(_)) => (None, Some(true)),
                Err(e) => return Err(e),
            },
            Err(_) => (None, None),
        };
        let rec = run(&c)?;
        let last = rec
            .final_row()
            .ok_or_else(|| Error::InsufficientData("sweep run produced no recorded rows".into()))?;
        entries.push(SweepEntry {
            value: v,
            admissible_alpha_max,
            alpha_exceeds_bound,
            final_v: last.v,
            final_f: last.f,
            final_consensus_error: last.consensus_error,
            consensus_gap: rec.degree_of_consensus.map(|d| d.gap),
            diverged: rec.diverged.clone(),
        });
    }
    Ok(SweepReport { param, entries })
}

impl SweepReport {
    pub fn csv(&self) -> String {
        let mut out = format!(
            "{},admissible_alpha_max,alpha_exceeds_bound,final_V,final_F,final_consensus_error,consensus_gap,diverged\n",
            self.param.name()
        );
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                e.value,
                e.admissible_alpha_max
                    .map_or(String::new(), |x| x.to_string()),
                e.alpha_exceeds_bound
                    .map_or(String::new(), |x| x.to_string()),
                e.final_v,
                e.final_f,
                e.final_consensus_error,
                e.consensus_gap.map_or(String::new(), |x| x.to_string()),
                e.diverged.as_deref().unwrap_or(""),
            )
            .expect("string write");
        }
        out
    }

    /// Swept values sorted by ascending final loss, then by ascending
    /// consensus gap as a tiebreaker.
    pub fn ranked_values(&self) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.sort_by(|&a, &b| {
            let (ea, eb) = (&self.entries[a], &self.entries[b]);
            ea.final_f.total_cmp(&eb.final_f).then(
                ea.consensus_gap
                    .unwrap_or(0.0)
                    .total_cmp(&eb.consensus_gap.unwrap_or(0.0)),
            )
        });
        idx.into_iter().map(|i| self.entries[i].value).collect()
    }

    /// Swept values sorted by ascending agreement gap; entries without a
    /// recorded gap sort last.
    pub fn ranked_by_gap(&self) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.sort_by(|&a, &b| {
            let ga = self.entries[a].consensus_gap.unwrap_or(f64::INFINITY);
            let gb = self.entries[b].consensus_gap.unwrap_or(f64::INFINITY);
            ga.total_cmp(&gb)
        });
        idx.into_iter().map(|i| self.entries[i].value).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep.csv"), self.csv())?;
        std::fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Bound report for the configured algorithm, using the record's empirical
/// gradient bounds. Constants are omitted when the objective carries no
/// convexity certificate.
pub fn bound_report_for(cfg: &RunConfig, rec: &RunRecord) -> Result<BoundReport> {
    let exp = cfg.build()?;
    let constants = exp.obj.constants().ok();
    BoundReport::compute(
        exp.kind,
        &exp.pi,
        constants.as_ref(),
        &exp.hp,
        rec.h_empirical,
        Some(rec.g_empirical),
        exp.lambda_n_tau_variant,
    )
}

/// Bound reports for every algorithm kind on one configuration, using
/// trajectory-empirical gradient bounds.
#[derive(Debug, Serialize)]
pub struct BoundsReport {
    pub h_used: f64,
    pub g_used: f64,
    pub reports: Vec<BoundReport>,
}

/// Runs the configuration once to measure the gradient bounds, then
/// evaluates the theoretical quantities for every algorithm kind under the
/// configured hyper-parameters.
pub fn bounds(cfg: &RunConfig) -> Result<BoundsReport> {
    let exp = cfg.build()?;
    let rec = run(cfg)?;
    let constants = exp.obj.constants().ok();
    let hp = cfg.algorithm.hyper_params();
    let mut reports = Vec::new();
    for kind in AlgorithmKind::ALL {
        reports.push(BoundReport::compute(
            kind,
            &exp.pi,
            constants.as_ref(),
            &hp,
            rec.h_empirical,
            Some(rec.g_empirical),
            cfg.algorithm.lambda_n_tau_variant,
        )?);
    }
    Ok(BoundsReport {
        h_used: rec.h_empirical,
        g_used: rec.g_empirical,
        reports,
    })
}

impl BoundsReport {
    pub fn text_table(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
        }
        let mut out = format!(
            "empirical bounds: h = {:.6}, G = {:.6}\n\n",
            self.h_used, self.g_used
        );
        writeln!(
            out,
            "{:<10} {:>14} {:>14} {:>12} {:>12} {:>12} {:>12}",
            "algorithm", "consensus", "radius", "decay_C", "noise_C", "alpha_max", "contractive"
        )
        .expect("string write");
        for r in &self.reports {
            let consensus = match &r.consensus_bound {
                Some(b) if b.infinite => "inf".to_string(),
                Some(b) => format!("{:.6}", b.value),
                None => "-".into(),
            };
            let contractive = r.contractive.map_or_else(|| "-".into(), |c| c.to_string());
            writeln!(
                out,
                "{:<10} {:>14} {:>14} {:>12} {:>12} {:>12} {:>12}",
                r.algorithm,
                consensus,
                cell(r.optimality_radius.or(r.momentum_radius)),
                cell(r.decay_constant),
                cell(r.noise_constant),
                cell(r.admissible_alpha_max),
                contractive,
            )
            .expect("string write");
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("bounds.json"), serde_json::to_string_pretty(self)?)?;
        std::fs::write(dir.join("bounds.txt"), self.text_table())?;
        Ok(())
    }
}
