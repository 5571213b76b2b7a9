//! Reproducible dataset partitioning across agents.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How samples are spread across agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scheme {
    /// Agent sizes differ by at most one.
    Balanced,
    /// Random unequal shares, each at least half of the equal share.
    Unbalanced,
    /// Each agent reserves `fraction` of two designated classes, the rest is
    /// pooled, shuffled, and dealt round-robin.
    ClassBiased { fraction: f64 },
}

/// Concentration of the symmetric Dirichlet behind the unbalanced scheme.
pub const DIRICHLET_CONCENTRATION: f64 = 1.0;

const MAX_REJECTION_ATTEMPTS: usize = 100_000;

/// Per-agent index lists plus everything needed to regenerate them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub scheme: Scheme,
    pub seed: u64,
    assignment: Vec<Vec<usize>>,
    /// (class, reserved count) pairs per agent, class-biased scheme only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bias_reservations: Option<Vec<Vec<(usize, usize)>>>,
    /// Recorded so unbalanced plans are fully specified.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dirichlet_concentration: Option<f64>,
}

impl PartitionPlan {
    pub fn make(
        n_samples: usize,
        labels: Option<&[usize]>,
        n_agents: usize,
        scheme: Scheme,
        seed: u64,
    ) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::InvalidPartition("need at least one agent".into()));
        }
        if n_samples < n_agents {
            return Err(Error::InvalidPartition(format!(
                "cannot split {n_samples} samples across {n_agents} agents"
            )));
        }
        if let Some(l) = labels {
            if l.len() != n_samples {
                return Err(Error::InvalidPartition(format!(
                    "{} labels for {n_samples} samples",
                    l.len()
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match scheme {
            Scheme::Balanced => {
                let assignment = split_by_sizes(n_samples, &balanced_sizes(n_samples, n_agents));
                Ok(PartitionPlan {
                    scheme,
                    seed,
                    assignment,
                    bias_reservations: None,
                    dirichlet_concentration: None,
                })
            }
            Scheme::Unbalanced => {
                let sizes = unbalanced_sizes(n_samples, n_agents, &mut rng)?;
                let mut indices: Vec<usize> = (0..n_samples).collect();
                indices.shuffle(&mut rng);
                let assignment = assign_shuffled(&indices, &sizes);
                Ok(PartitionPlan {
                    scheme,
                    seed,
                    assignment,
                    bias_reservations: None,
                    dirichlet_concentration: Some(DIRICHLET_CONCENTRATION),
                })
            }
            Scheme::ClassBiased { fraction } => {
                if !(0.0..1.0).contains(&fraction) || fraction <= 0.0 {
                    return Err(Error::InvalidPartition(format!(
                        "bias fraction must lie in (0, 1), got {fraction}"
                    )));
                }
                let labels = labels.ok_or_else(|| {
                    Error::InvalidPartition("class-biased scheme requires labels".into())
                })?;
                let (assignment, reservations) =
                    class_biased(labels, n_agents, fraction, &mut rng)?;
                Ok(PartitionPlan {
                    scheme,
                    seed,
                    assignment,
                    bias_reservations: Some(reservations),
                    dirichlet_concentration: None,
                })
            }
        }
    }

    pub fn n_agents(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_samples(&self) -> usize {
        self.assignment.iter().map(Vec::len).sum()
    }

    pub fn assignment(&self) -> &[Vec<usize>] {
        &self.assignment
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.assignment.iter().map(Vec::len).collect()
    }

    pub fn to_json_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let plan: PartitionPlan = serde_json::from_reader(f)?;
        plan.validate()?;
        Ok(plan)
    }

    /// Disjoint-cover check plus the per-scheme size invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_samples();
        let mut seen = vec![false; n];
        for list in &self.assignment {
            if list.is_empty() {
                return Err(Error::InvalidPartition("agent with empty shard".into()));
            }
            for &i in list {
                if i >= n || seen[i] {
                    return Err(Error::InvalidPartition(format!(
                        "index {i} out of range or repeated"
                    )));
                }
                seen[i] = true;
            }
        }
        let sizes = self.sizes();
        match self.scheme {
            Scheme::Balanced => {
                let max = *sizes.iter().max().unwrap();
                let min = *sizes.iter().min().unwrap();
                if max - min > 1 {
                    return Err(Error::InvalidPartition(format!(
                        "balanced sizes spread {min}..{max}"
                    )));
                }
            }
            Scheme::Unbalanced => {
                let floor = half_share_floor(n, self.n_agents());
                if sizes.iter().any(|&s| s < floor) {
                    return Err(Error::InvalidPartition(format!(
                        "unbalanced share below floor {floor}: {sizes:?}"
                    )));
                }
            }
            Scheme::ClassBiased { .. } => {}
        }
        Ok(())
    }
}

fn balanced_sizes(n: usize, agents: usize) -> Vec<usize> {
    let base = n / agents;
    let extra = n % agents;
    (0..agents).map(|j| base + usize::from(j < extra)).collect()
}

/// ceil((n / N) / 2) with n / N taken as a real share.
fn half_share_floor(n: usize, agents: usize) -> usize {
    n.div_ceil(2 * agents)
}

fn unbalanced_sizes(n: usize, agents: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if agents == 1 {
        return Ok(vec![n]);
    }
    let floor = half_share_floor(n, agents);
    let dir = Dirichlet::new_with_size(DIRICHLET_CONCENTRATION, agents)
        .map_err(|e| Error::InvalidPartition(format!("dirichlet setup failed: {e}")))?;
    for _ in 0..MAX_REJECTION_ATTEMPTS {
        let props = dir.sample(rng);
        let sizes = largest_remainder_sizes(n, &props);
        if sizes.iter().all(|&s| s >= floor) {
            return Ok(sizes);
        }
    }
    Err(Error::InvalidPartition(format!(
        "no unbalanced split with all shares >= {floor} found in {MAX_REJECTION_ATTEMPTS} draws"
    )))
}

/// Integer sizes summing to n that track the real proportions.
fn largest_remainder_sizes(n: usize, props: &[f64]) -> Vec<usize> {
    let mut sizes: Vec<usize> = props
        .iter()
        .map(|p| (p * n as f64).floor() as usize)
        .collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..props.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = props[a] * n as f64 - (props[a] * n as f64).floor();
        let rb = props[b] * n as f64 - (props[b] * n as f64).floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for k in 0..(n - assigned) {
        sizes[order[k % props.len()]] += 1;
    }
    sizes
}

fn split_by_sizes(n: usize, sizes: &[usize]) -> Vec<Vec<usize>> {
    let indices: Vec<usize> = (0..n).collect();
    assign_shuffled(&indices, sizes)
}

fn assign_shuffled(indices: &[usize], sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        out.push(indices[start..start + s].to_vec());
        start += s;
    }
    out
}

fn class_biased(
    labels: &[usize],
    agents: usize,
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Vec<usize>>, Vec<Vec<(usize, usize)>>)> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let classes: Vec<usize> = by_class.keys().copied().collect();
    if classes.len() < 2 {
        return Err(Error::InvalidPartition(format!(
            "class-biased scheme needs at least 2 classes, found {}",
            classes.len()
        )));
    }
    let class_sizes: BTreeMap<usize, usize> = by_class.iter().map(|(&c, v)| (c, v.len())).collect();
    // reservation draw order is randomized per class so repeated bias
    // classes (agents > classes/2) do not always reserve the same samples
    for v in by_class.values_mut() {
        v.shuffle(rng);
    }

    let mut assignment = vec![Vec::new(); agents];
    let mut reservations: Vec<Vec<(usize, usize)>> = (0..agents)
        .map(|j| {
            (0..2)
                .map(|offset| (classes[(2 * j + offset) % classes.len()], 0))
                .collect()
        })
        .collect();
    // reservations are drawn one sample per (agent, bias class) per round so
    // agents sharing a scarce class split it instead of starving the last one
    let want: Vec<Vec<usize>> = reservations
        .iter()
        .map(|slots| {
            slots
                .iter()
                .map(|&(class, _)| (fraction * class_sizes[&class] as f64).floor() as usize)
                .collect()
        })
        .collect();
    let max_want = want.iter().flatten().copied().max().unwrap_or(0);
    for round in 0..max_want {
        for j in 0..agents {
            for slot in 0..2 {
                if round >= want[j][slot] {
                    continue;
                }
                let class = reservations[j][slot].0;
                let pool = by_class.get_mut(&class).unwrap();
                if let Some(i) = pool.pop() {
                    assignment[j].push(i);
                    reservations[j][slot].1 += 1;
                }
            }
        }
    }

    let mut remainder: Vec<usize> = by_class.into_values().flatten().collect();
    remainder.shuffle(rng);
    for (k, i) in remainder.into_iter().enumerate() {
        assignment[k % agents].push(i);
    }
    for list in &mut assignment {
        list.sort_unstable();
        if list.is_empty() {
            return Err(Error::InvalidPartition(
                "class-biased split left an agent empty".into(),
            ));
        }
    }
    Ok((assignment, reservations))
}
