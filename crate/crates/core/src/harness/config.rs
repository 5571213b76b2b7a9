//! Run configuration: a single TOML file with nested sections for the
//! topology, objective, partition, algorithm, and run budget.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithms::{AlgorithmKind, HyperParams, Mode};
use crate::analysis::{LyapunovKind, LyapunovSpec};
use crate::error::{Error, Result};
use crate::objectives::{Dataset, Objective};
use crate::partition::{PartitionPlan, Scheme};
use crate::rng;
use crate::topology::{Graph, InteractionMatrix, TopologyKind, WeightScheme};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TopologySection {
    pub kind: TopologyChoice,
    #[serde(default = "default_agents")]
    pub n_agents: usize,
    #[serde(default = "default_weights")]
    pub weights: WeightScheme,
    /// Path to an edge-list file, used when kind = "edge-list".
    #[serde(default)]
    pub edge_list: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyChoice {
    Ring,
    Complete,
    Star,
    EdgeList,
}

fn default_agents() -> usize {
    5
}

fn default_weights() -> WeightScheme {
    WeightScheme::Metropolis
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ObjectiveSection {
    pub kind: ObjectiveChoice,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    /// Quadratic eigenvalue range.
    #[serde(default = "default_eig_min")]
    pub eig_min: f64,
    #[serde(default = "default_eig_max")]
    pub eig_max: f64,
    /// Synthetic dataset size for the data-driven kinds.
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    /// Hidden width for the MLP kind.
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    /// Seed for dataset synthesis and the objective's random draws.
    #[serde(default = "default_data_seed")]
    pub data_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveChoice {
    Quadratic,
    Logistic,
    Mlp,
}

fn default_dimension() -> usize {
    2
}
fn default_eig_min() -> f64 {
    0.5
}
fn default_eig_max() -> f64 {
    5.0
}
fn default_n_samples() -> usize {
    200
}
fn default_separation() -> f64 {
    2.0
}
fn default_ridge() -> f64 {
    1e-2
}
fn default_hidden() -> usize {
    8
}
fn default_data_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PartitionSection {
    #[serde(default = "default_scheme")]
    pub scheme: SchemeChoice,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeChoice {
    Balanced,
    Unbalanced,
    ClassBiased,
}

fn default_scheme() -> SchemeChoice {
    SchemeChoice::Balanced
}
fn default_fraction() -> f64 {
    0.2
}

impl Default for PartitionSection {
    fn default() -> Self {
        PartitionSection {
            scheme: default_scheme(),
            fraction: default_fraction(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct AlgorithmSection {
    pub kind: AlgorithmKind,
    pub alpha: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_tau")]
    pub tau: usize,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_r")]
    pub r1: f64,
    #[serde(default = "default_r")]
    pub r2: f64,
    #[serde(default)]
    pub noise_b: f64,
    #[serde(default)]
    pub noise_bv: f64,
    /// Use lambda_N^tau instead of lambda_N inside the generalized
    /// step-size bound.
    #[serde(default)]
    pub lambda_n_tau_variant: bool,
}

fn default_omega() -> f64 {
    1.0
}
fn default_tau() -> usize {
    1
}
fn default_batch_size() -> usize {
    1
}
fn default_mode() -> Mode {
    Mode::Deterministic
}
fn default_r() -> f64 {
    1.0
}

impl AlgorithmSection {
    pub fn hyper_params(&self) -> HyperParams {
        HyperParams {
            alpha: self.alpha,
            omega: self.omega,
            tau: self.tau,
            mu: self.mu,
            batch_size: self.batch_size,
            mode: self.mode,
            r1: self.r1,
            r2: self.r2,
            noise_b: self.noise_b,
            noise_bv: self.noise_bv,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_init")]
    pub init: InitChoice,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitChoice {
    Zeros,
    Gaussian,
}

fn default_iterations() -> usize {
    500
}
fn default_replicas() -> usize {
    1
}
fn default_seed() -> u64 {
    42
}
fn default_record_every() -> usize {
    1
}
fn default_init() -> InitChoice {
    InitChoice::Zeros
}
fn default_init_scale() -> f64 {
    0.1
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub topology: TopologySection,
    pub objective: ObjectiveSection,
    #[serde(default)]
    pub partition: PartitionSection,
    pub algorithm: AlgorithmSection,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Stable hash of the full configuration, recorded in every output.
    /// Canonicalizes through JSON; TOML cannot represent seeds above
    /// i64::MAX.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }

    /// Validates every section and assembles the executable pieces.
    pub fn build(&self) -> Result<Experiment> {
        let hp = self.algorithm.hyper_params();
        hp.validate()?;
        if self.run.iterations == usize::MAX || self.run.record_every == 0 {
            return Err(Error::InvalidConfig(
                "record-every must be >= 1 and iterations bounded".into(),
            ));
        }
        if self.run.replicas == 0 {
            return Err(Error::InvalidConfig("replicas must be >= 1".into()));
        }

        let graph = match self.topology.kind {
            TopologyChoice::Ring => Graph::build(TopologyKind::Ring, self.topology.n_agents)?,
            TopologyChoice::Complete => {
                Graph::build(TopologyKind::Complete, self.topology.n_agents)?
            }
            TopologyChoice::Star => Graph::build(TopologyKind::Star, self.topology.n_agents)?,
            TopologyChoice::EdgeList => {
                let path = self.topology.edge_list.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("edge-list topology needs an edge-list path".into())
                })?;
                Graph::from_edge_list_file(path)?
            }
        };
        let n = graph.n_agents();
        let pi = InteractionMatrix::build(&graph, self.topology.weights)?;

        let scheme = match self.partition.scheme {
            SchemeChoice::Balanced => Scheme::Balanced,
            SchemeChoice::Unbalanced => Scheme::Unbalanced,
            SchemeChoice::ClassBiased => Scheme::ClassBiased {
                fraction: self.partition.fraction,
            },
        };

        let (obj, data, plan) = match self.objective.kind {
            ObjectiveChoice::Quadratic => {
                let obj = Objective::random_quadratic(
                    n,
                    self.objective.dimension,
                    self.objective.eig_min,
                    self.objective.eig_max,
                    self.objective.data_seed,
                )?;
                (obj, None, None)
            }
            ObjectiveChoice::Logistic | ObjectiveChoice::Mlp => {
                let data = Dataset::synthetic_two_class(
                    self.objective.n_samples,
                    self.objective.dimension,
                    self.objective.separation,
                    self.objective.data_seed,
                )?;
                let plan = PartitionPlan::make(
                    data.n_samples(),
                    Some(&data.labels),
                    n,
                    scheme,
                    rng::derive_seed(self.run.master_seed, 0x7061_7274),
                )?;
                let obj = if self.objective.kind == ObjectiveChoice::Logistic {
                    Objective::logistic_from_partition(&data, &plan, self.objective.ridge)?
                } else {
                    Objective::mlp_from_partition(&data, &plan, self.objective.hidden)?
                };
                (obj, Some(data), Some(plan))
            }
        };

        Ok(Experiment {
            pi,
            obj,
            data,
            plan,
            kind: self.algorithm.kind,
            hp,
            lambda_n_tau_variant: self.algorithm.lambda_n_tau_variant,
            config_hash: self.hash(),
        })
    }

    /// The Lyapunov function matching the configured algorithm kind.
    pub fn lyapunov_spec(&self) -> Result<LyapunovSpec> {
        lyapunov_spec_for(self.algorithm.kind, &self.algorithm.hyper_params())
    }

    /// CLI overrides.
    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        out_dir: Option<PathBuf>,
        deterministic: bool,
    ) {
        if let Some(s) = seed {
            self.run.master_seed = s;
        }
        if let Some(d) = out_dir {
            self.run.out_dir = d;
        }
        if deterministic {
            self.algorithm.mode = Mode::Deterministic;
            self.algorithm.noise_b = 0.0;
            self.algorithm.noise_bv = 0.0;
            self.algorithm.r1 = 1.0;
            self.algorithm.r2 = 1.0;
        }
    }
}

pub fn lyapunov_kind_for(kind: AlgorithmKind, hp: &HyperParams) -> LyapunovKind {
    match kind {
        AlgorithmKind::Sgd => LyapunovKind::Generalized { omega: 1.0 },
        AlgorithmKind::GCdsgd | AlgorithmKind::GCdmsgd => {
            LyapunovKind::Generalized { omega: hp.omega }
        }
        AlgorithmKind::Cdsgd | AlgorithmKind::Cdmsgd => LyapunovKind::Incremental { tau: 1 },
        AlgorithmKind::ICdsgd | AlgorithmKind::ICdmsgd => LyapunovKind::Incremental { tau: hp.tau },
    }
}

pub fn lyapunov_spec_for(kind: AlgorithmKind, hp: &HyperParams) -> Result<LyapunovSpec> {
    match lyapunov_kind_for(kind, hp) {
        LyapunovKind::Generalized { omega } => LyapunovSpec::generalized(omega, hp.alpha),
        LyapunovKind::Incremental { tau } => LyapunovSpec::incremental(tau, hp.alpha),
    }
}

/// Validated, executable pieces assembled from a RunConfig.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub pi: InteractionMatrix,
    pub obj: Objective,
    pub data: Option<Dataset>,
    pub plan: Option<PartitionPlan>,
    pub kind: AlgorithmKind,
    pub hp: HyperParams,
    pub lambda_n_tau_variant: bool,
    pub config_hash: String,
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const QUAD_TOML: &str = r#"
[topology]
kind = "ring"
n-agents = 5
weights = "lazy-metropolis"

[objective]
kind = "quadratic"
dimension = 2

[algorithm]
kind = "g-cdsgd"
alpha = 0.02
omega = 0.5

[run]
iterations = 50
master-seed = 7
"#;

    #[test]
    fn parses_and_builds() {
        let cfg = RunConfig::from_toml_str(QUAD_TOML).unwrap();
        let exp = cfg.build().unwrap();
        assert_eq!(exp.pi.n_agents(), 5);
        assert_eq!(exp.obj.dimension(), 2);
        assert_eq!(exp.kind, AlgorithmKind::GCdsgd);
        assert_eq!(exp.config_hash.len(), 64);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::from_toml_str(QUAD_TOML).unwrap();
        let b = RunConfig::from_toml_str(QUAD_TOML).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = RunConfig::from_toml_str(QUAD_TOML).unwrap();
        c.algorithm.alpha = 0.03;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_toml_str(&QUAD_TOML.replace("alpha", "alhpa")).is_err());
        let mut cfg = RunConfig::from_toml_str(QUAD_TOML).unwrap();
        cfg.algorithm.alpha = -1.0;
        assert!(cfg.build().is_err());
        cfg.algorithm.alpha = 0.02;
        cfg.run.record_every = 0;
        assert!(cfg.build().is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = RunConfig::from_toml_str(QUAD_TOML).unwrap();
        cfg.algorithm.mode = Mode::Stochastic;
        cfg.algorithm.noise_b = 1.0;
        cfg.apply_overrides(Some(99), Some(PathBuf::from("/tmp/x")), true);
        assert_eq!(cfg.run.master_seed, 99);
        assert_eq!(cfg.run.out_dir, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.algorithm.mode, Mode::Deterministic);
        assert_eq!(cfg.algorithm.noise_b, 0.0);
        cfg.algorithm.hyper_params().validate().unwrap();
    }

    #[test]
    fn logistic_config_builds_with_partition() {
        let toml = QUAD_TOML.replace(
            "kind = \"quadratic\"",
            "kind = \"logistic\"\nn-samples = 40",
        );
        let cfg = RunConfig::from_toml_str(&toml).unwrap();
        let exp = cfg.build().unwrap();
        assert!(exp.plan.is_some());
        assert_eq!(exp.plan.as_ref().unwrap().n_agents(), 5);
        assert_eq!(exp.obj.n_agents(), 5);
    }
}
