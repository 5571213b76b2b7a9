//! Per-agent objective functions with exact and minibatch gradients.
//!
//! Losses follow the sum convention: an agent's loss is the sum of its
//! per-sample losses (plus a single ridge term for the logistic kind), and a
//! minibatch gradient is the batch sum rescaled by n_j / b' so that its
//! expectation over uniformly drawn batches equals the exact gradient.

pub mod dataset;
pub mod idx;

pub use dataset::Dataset;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::partition::PartitionPlan;
use crate::rng;

/// One gradient evaluation, full-batch or minibatch.
#[derive(Debug, Clone)]
pub struct GradientSample {
    pub value: Array1<f64>,
    pub batch_indices: Vec<usize>,
    pub is_full_batch: bool,
}

/// Strong convexity / smoothness constants for convex objective kinds.
#[derive(Debug, Clone)]
pub struct ConvexConstants {
    /// H_m = min_j H_j.
    pub h_strong: f64,
    /// gamma_m = max_j gamma_j.
    pub gamma_smooth: f64,
    /// (H_j, gamma_j) per agent.
    pub per_agent: Vec<(f64, f64)>,
}

/// A single agent's quadratic loss (1/2) x' A x + b' x + c with A symmetric
/// positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticAgent {
    pub a: Array2<f64>,
    pub b: Array1<f64>,
    pub c: f64,
}

impl QuadraticAgent {
    /// Random SPD quadratic with eigenvalues drawn uniformly from
    /// [eig_min, eig_max].
    pub fn random<R: Rng>(d: usize, eig_min: f64, eig_max: f64, rng: &mut R) -> Self {
        let q = random_orthogonal(d, rng);
        let eigs: Vec<f64> = (0..d)
            .map(|i| {
                if d == 1 || i == 0 {
                    eig_min
                } else if i == d - 1 {
                    eig_max
                } else {
                    rng.gen_range(eig_min..=eig_max)
                }
            })
            .collect();
        let mut a = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for (k, &e) in eigs.iter().enumerate() {
                    acc += q[[k, i]] * e * q[[k, j]];
                }
                a[[i, j]] = acc;
            }
        }
        // force exact symmetry
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (a[[i, j]] + a[[j, i]]);
                a[[i, j]] = avg;
                a[[j, i]] = avg;
            }
        }
        let b = Array1::from_iter((0..d).map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            v
        }));
        QuadraticAgent { a, b, c: 0.0 }
    }
}

fn random_orthogonal<R: Rng>(d: usize, rng: &mut R) -> Array2<f64> {
    // Gram-Schmidt on a Gaussian matrix; rows are the orthonormal basis.
    let mut q = Array2::from_shape_fn((d, d), |_| StandardNormal.sample(rng));
    for i in 0..d {
        for j in 0..i {
            let proj: f64 = q.row(i).dot(&q.row(j));
            let rj = q.row(j).to_owned();
            let mut ri = q.row_mut(i);
            ri.zip_mut_with(&rj, |a, b| *a -= proj * b);
        }
        let norm = q.row(i).dot(&q.row(i)).sqrt();
        q.row_mut(i).mapv_inplace(|v| v / norm);
    }
    q
}

/// Per-agent data shard for the data-driven objective kinds.
#[derive(Debug, Clone)]
pub struct AgentShard {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

/// The swarm objective: one loss per agent, all of the same kind.
#[derive(Debug, Clone)]
pub enum Objective {
    Quadratic {
        agents: Vec<QuadraticAgent>,
        dimension: usize,
    },
    Logistic {
        agents: Vec<AgentShard>,
        ridge: f64,
        dimension: usize,
    },
    Mlp {
        agents: Vec<AgentShard>,
        hidden: usize,
        input_dim: usize,
        dimension: usize,
    },
}

const MAX_MLP_HIDDEN: usize = 32;

impl Objective {
    pub fn quadratic(agents: Vec<QuadraticAgent>) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::InvalidObjective("no agents".into()));
        }
        let d = agents[0].b.len();
        for (j, ag) in agents.iter().enumerate() {
            if ag.a.nrows() != d || ag.a.ncols() != d || ag.b.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "agent {j} quadratic has inconsistent dimensions"
                )));
            }
            let eigs = linalg::symmetric_eigenvalues(&ag.a)?;
            let min = *eigs.last().expect("nonempty");
            if min <= 0.0 {
                return Err(Error::InvalidObjective(format!(
                    "agent {j} Hessian not positive definite (lambda_min = {min})"
                )));
            }
        }
        Ok(Objective::Quadratic {
            agents,
            dimension: d,
        })
    }

    /// Seeded family of random SPD quadratics sharing eigenvalue range.
    pub fn random_quadratic(
        n_agents: usize,
        d: usize,
        eig_min: f64,
        eig_max: f64,
        seed: u64,
    ) -> Result<Self> {
        if eig_min <= 0.0 || eig_max < eig_min {
            return Err(Error::InvalidObjective(format!(
                "need 0 < eig_min <= eig_max, got [{eig_min}, {eig_max}]"
            )));
        }
        let mut r = rng::agent_stream(seed, 0, 0);
        let agents = (0..n_agents)
            .map(|_| QuadraticAgent::random(d, eig_min, eig_max, &mut r))
            .collect();
        Objective::quadratic(agents)
    }

    pub fn logistic_from_partition(
        data: &Dataset,
        plan: &PartitionPlan,
        ridge: f64,
    ) -> Result<Self> {
        if ridge <= 0.0 {
            return Err(Error::InvalidObjective(format!(
                "logistic ridge must be positive, got {ridge}"
            )));
        }
        let agents = shards_from_plan(data, plan)?;
        Ok(Objective::Logistic {
            agents,
            ridge,
            dimension: data.dimension(),
        })
    }

    pub fn mlp_from_partition(data: &Dataset, plan: &PartitionPlan, hidden: usize) -> Result<Self> {
        if hidden == 0 || hidden > MAX_MLP_HIDDEN {
            return Err(Error::InvalidObjective(format!(
                "hidden units must lie in 1..={MAX_MLP_HIDDEN}, got {hidden}"
            )));
        }
        let agents = shards_from_plan(data, plan)?;
        let input_dim = data.dimension();
        Ok(Objective::Mlp {
            agents,
            hidden,
            input_dim,
            dimension: mlp_param_count(input_dim, hidden),
        })
    }

    pub fn n_agents(&self) -> usize {
        match self {
            Objective::Quadratic { agents, .. } => agents.len(),
            Objective::Logistic { agents, .. } => agents.len(),
            Objective::Mlp { agents, .. } => agents.len(),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Objective::Quadratic { dimension, .. }
            | Objective::Logistic { dimension, .. }
            | Objective::Mlp { dimension, .. } => *dimension,
        }
    }

    /// Number of samples held by agent `j` (1 for the quadratic kind, which
    /// has no dataset).
    pub fn n_samples(&self, j: usize) -> usize {
        match self {
            Objective::Quadratic { .. } => 1,
            Objective::Logistic { agents, .. } | Objective::Mlp { agents, .. } => {
                agents[j].x.nrows()
            }
        }
    }

    /// Agent j's loss at `theta` (sum convention).
    pub fn eval(&self, j: usize, theta: ArrayView1<'_, f64>) -> Result<f64> {
        check_finite(theta)?;
        let v = match self {
            Objective::Quadratic { agents, .. } => {
                let ag = &agents[j];
                0.5 * theta.dot(&ag.a.dot(&theta)) + ag.b.dot(&theta) + ag.c
            }
            Objective::Logistic { agents, ridge, .. } => {
                let ag = &agents[j];
                let mut acc = 0.0;
                for i in 0..ag.x.nrows() {
                    let z = ag.x.row(i).dot(&theta);
                    acc += softplus(-ag.y[i] * z);
                }
                acc + 0.5 * ridge * theta.dot(&theta)
            }
            Objective::Mlp {
                agents,
                hidden,
                input_dim,
                ..
            } => {
                let ag = &agents[j];
                let mut acc = 0.0;
                for i in 0..ag.x.nrows() {
                    let z = mlp_forward(theta, ag.x.row(i), *input_dim, *hidden);
                    acc += softplus(-ag.y[i] * z);
                }
                acc
            }
        };
        if !v.is_finite() {
            return Err(Error::InvalidObjective(format!(
                "non-finite loss for agent {j}"
            )));
        }
        Ok(v)
    }

    /// Exact (full-batch) gradient for agent `j`.
    pub fn grad(&self, j: usize, theta: ArrayView1<'_, f64>) -> Result<GradientSample> {
        check_finite(theta)?;
        let all: Vec<usize> = (0..self.n_samples(j)).collect();
        let value = self.grad_on_batch(j, theta, &all)?;
        Ok(GradientSample {
            value,
            batch_indices: all,
            is_full_batch: true,
        })
    }

    /// Gradient estimate from an explicit batch, rescaled by n_j / |batch|.
    /// The ridge term (logistic) is always exact.
    pub fn grad_on_batch(
        &self,
        j: usize,
        theta: ArrayView1<'_, f64>,
        batch: &[usize],
    ) -> Result<Array1<f64>> {
        if batch.is_empty() {
            return Err(Error::InvalidObjective("empty minibatch".into()));
        }
        let n_j = self.n_samples(j);
        let scale = n_j as f64 / batch.len() as f64;
        let d = self.dimension();
        let mut g = Array1::zeros(d);
        match self {
            Objective::Quadratic { agents, .. } => {
                let ag = &agents[j];
                g = ag.a.dot(&theta) + &ag.b;
            }
            Objective::Logistic { agents, ridge, .. } => {
                let ag = &agents[j];
                for &i in batch {
                    let xi = ag.x.row(i);
                    let z = xi.dot(&theta);
                    let coeff = -ag.y[i] * sigmoid(-ag.y[i] * z);
                    g.zip_mut_with(&xi, |acc, &xv| *acc += coeff * xv);
                }
                g *= scale;
                g.zip_mut_with(&theta, |acc, &t| *acc += ridge * t);
            }
            Objective::Mlp {
                agents,
                hidden,
                input_dim,
                ..
            } => {
                let ag = &agents[j];
                for &i in batch {
                    mlp_backward(theta, ag.x.row(i), ag.y[i], *input_dim, *hidden, &mut g);
                }
                g *= scale;
            }
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidObjective(format!(
                "non-finite gradient for agent {j}"
            )));
        }
        Ok(g)
    }

    /// Minibatch gradient with a uniformly drawn batch of size `batch_size`.
    pub fn stochastic_grad<R: Rng>(
        &self,
        j: usize,
        theta: ArrayView1<'_, f64>,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<GradientSample> {
        let n_j = self.n_samples(j);
        if batch_size == 0 || batch_size > n_j {
            return Err(Error::InvalidObjective(format!(
                "batch size {batch_size} out of range 1..={n_j} for agent {j}"
            )));
        }
        if batch_size == n_j {
            return self.grad(j, theta);
        }
        let mut batch = rand::seq::index::sample(rng, n_j, batch_size).into_vec();
        batch.sort_unstable();
        let value = self.grad_on_batch(j, theta, &batch)?;
        Ok(GradientSample {
            value,
            batch_indices: batch,
            is_full_batch: false,
        })
    }

    /// Total loss F(Theta) = sum_j f_j(theta_j) with theta_j = row j.
    pub fn total_loss(&self, theta: &Array2<f64>) -> Result<f64> {
        self.check_state_shape(theta)?;
        let mut acc = 0.0;
        for j in 0..self.n_agents() {
            acc += self.eval(j, theta.row(j))?;
        }
        Ok(acc)
    }

    /// Stacked full gradient, one row per agent.
    pub fn full_gradient_matrix(&self, theta: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_state_shape(theta)?;
        let mut g = Array2::zeros(theta.raw_dim());
        for j in 0..self.n_agents() {
            let gj = self.grad(j, theta.row(j))?;
            g.row_mut(j).assign(&gj.value);
        }
        Ok(g)
    }

    /// Stacked minibatch gradient with per-agent streams derived from
    /// (master seed, agent, iteration). Any two callers passing the same
    /// triple observe identical draws.
    pub fn stochastic_gradient_matrix(
        &self,
        theta: &Array2<f64>,
        batch_size: usize,
        master_seed: u64,
        iteration: usize,
    ) -> Result<Array2<f64>> {
        self.check_state_shape(theta)?;
        let mut g = Array2::zeros(theta.raw_dim());
        for j in 0..self.n_agents() {
            let mut stream = rng::agent_stream(master_seed, j, iteration);
            let b = batch_size.min(self.n_samples(j));
            let gj = self.stochastic_grad(j, theta.row(j), b, &mut stream)?;
            g.row_mut(j).assign(&gj.value);
        }
        Ok(g)
    }

    /// Analytic strong-convexity/smoothness constants. Errors for the MLP
    /// kind, which has no convexity certificate.
    pub fn constants(&self) -> Result<ConvexConstants> {
        match self {
            Objective::Quadratic { agents, .. } => {
                let mut per_agent = Vec::with_capacity(agents.len());
                for ag in agents {
                    let eigs = linalg::symmetric_eigenvalues(&ag.a)?;
                    per_agent.push((*eigs.last().expect("nonempty"), eigs[0]));
                }
                Ok(collect_constants(per_agent))
            }
            Objective::Logistic { agents, ridge, .. } => {
                let mut per_agent = Vec::with_capacity(agents.len());
                for ag in agents {
                    let gram = ag.x.t().dot(&ag.x);
                    let eigs = linalg::symmetric_eigenvalues(&gram)?;
                    per_agent.push((*ridge, ridge + 0.25 * eigs[0]));
                }
                Ok(collect_constants(per_agent))
            }
            Objective::Mlp { .. } => Err(Error::NonconvexConstants(
                "H_m is undefined for the MLP objective; use empirical estimates".into(),
            )),
        }
    }

    /// Classification accuracy of agent parameters over the given samples,
    /// for the kinds that classify. `None` for the quadratic kind.
    pub fn accuracy(
        &self,
        theta: ArrayView1<'_, f64>,
        x: &Array2<f64>,
        y: &Array1<f64>,
    ) -> Option<f64> {
        let decide = |z: f64| if z >= 0.0 { 1.0 } else { -1.0 };
        let n = x.nrows();
        match self {
            Objective::Quadratic { .. } => None,
            Objective::Logistic { .. } => {
                let correct = (0..n)
                    .filter(|&i| decide(x.row(i).dot(&theta)) == y[i])
                    .count();
                Some(correct as f64 / n as f64)
            }
            Objective::Mlp {
                hidden, input_dim, ..
            } => {
                let correct = (0..n)
                    .filter(|&i| decide(mlp_forward(theta, x.row(i), *input_dim, *hidden)) == y[i])
                    .count();
                Some(correct as f64 / n as f64)
            }
        }
    }

    /// The shards behind the data-driven kinds; `None` for quadratics.
    pub fn shards(&self) -> Option<&[AgentShard]> {
        match self {
            Objective::Quadratic { .. } => None,
            Objective::Logistic { agents, .. } | Objective::Mlp { agents, .. } => Some(agents),
        }
    }

    pub fn quadratic_agents(&self) -> Option<&[QuadraticAgent]> {
        match self {
            Objective::Quadratic { agents, .. } => Some(agents),
            _ => None,
        }
    }

    fn check_state_shape(&self, theta: &Array2<f64>) -> Result<()> {
        if theta.nrows() != self.n_agents() || theta.ncols() != self.dimension() {
            return Err(Error::DimensionMismatch(format!(
                "state is {}x{}, objective expects {}x{}",
                theta.nrows(),
                theta.ncols(),
                self.n_agents(),
                self.dimension()
            )));
        }
        Ok(())
    }
}

fn collect_constants(per_agent: Vec<(f64, f64)>) -> ConvexConstants {
    let h_strong = per_agent.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let gamma_smooth = per_agent
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    ConvexConstants {
        h_strong,
        gamma_smooth,
        per_agent,
    }
}

fn shards_from_plan(data: &Dataset, plan: &PartitionPlan) -> Result<Vec<AgentShard>> {
    if plan.n_samples() != data.n_samples() {
        return Err(Error::DimensionMismatch(format!(
            "plan covers {} samples, dataset has {}",
            plan.n_samples(),
            data.n_samples()
        )));
    }
    let d = data.dimension();
    let mut shards = Vec::with_capacity(plan.n_agents());
    for indices in plan.assignment() {
        if indices.is_empty() {
            return Err(Error::InvalidPartition("agent with empty shard".into()));
        }
        let mut x = Array2::zeros((indices.len(), d));
        let mut y = Array1::zeros(indices.len());
        for (row, &i) in indices.iter().enumerate() {
            x.row_mut(row).assign(&data.x.row(i));
            y[row] = data.y[i];
        }
        shards.push(AgentShard { x, y });
    }
    Ok(shards)
}

fn check_finite(theta: ArrayView1<'_, f64>) -> Result<()> {
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidObjective(
            "non-finite parameter vector".into(),
        ));
    }
    Ok(())
}

fn softplus(t: f64) -> f64 {
    if t > 30.0 {
        t
    } else if t < -30.0 {
        t.exp()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn mlp_param_count(input_dim: usize, hidden: usize) -> usize {
    hidden * input_dim + hidden + hidden + 1
}

/// theta layout: [W1 (hidden x input, row-major) | b1 | w2 | b2].
fn mlp_forward(
    theta: ArrayView1<'_, f64>,
    x: ArrayView1<'_, f64>,
    input_dim: usize,
    hidden: usize,
) -> f64 {
    let w1 = &theta.as_slice().expect("contiguous theta")[..hidden * input_dim];
    let b1 = &theta.as_slice().unwrap()[hidden * input_dim..hidden * input_dim + hidden];
    let w2 =
        &theta.as_slice().unwrap()[hidden * input_dim + hidden..hidden * input_dim + 2 * hidden];
    let b2 = theta[hidden * input_dim + 2 * hidden];
    let mut z = b2;
    for h in 0..hidden {
        let mut pre = b1[h];
        for (k, &xv) in x.iter().enumerate() {
            pre += w1[h * input_dim + k] * xv;
        }
        z += w2[h] * pre.tanh();
    }
    z
}

fn mlp_backward(
    theta: ArrayView1<'_, f64>,
    x: ArrayView1<'_, f64>,
    y: f64,
    input_dim: usize,
    hidden: usize,
    grad: &mut Array1<f64>,
) {
    let ts = theta.as_slice().expect("contiguous theta");
    let w1 = &ts[..hidden * input_dim];
    let b1 = &ts[hidden * input_dim..hidden * input_dim + hidden];
    let w2 = &ts[hidden * input_dim + hidden..hidden * input_dim + 2 * hidden];
    let b2 = ts[hidden * input_dim + 2 * hidden];

    let mut act = vec![0.0; hidden];
    let mut z = b2;
    for h in 0..hidden {
        let mut pre = b1[h];
        for (k, &xv) in x.iter().enumerate() {
            pre += w1[h * input_dim + k] * xv;
        }
        act[h] = pre.tanh();
        z += w2[h] * act[h];
    }
    let dz = -y * sigmoid(-y * z);

    let gs = grad.as_slice_mut().expect("contiguous grad");
    for h in 0..hidden {
        let da = dz * w2[h] * (1.0 - act[h] * act[h]);
        for (k, &xv) in x.iter().enumerate() {
            gs[h * input_dim + k] += da * xv;
        }
        gs[hidden * input_dim + h] += da;
        gs[hidden * input_dim + hidden + h] += dz * act[h];
    }
    gs[hidden * input_dim + 2 * hidden] += dz;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{PartitionPlan, Scheme};
    use itertools::Itertools;
    use ndarray::array;

    fn quad_identity(n_agents: usize, d: usize) -> Objective {
        let agents = (0..n_agents)
            .map(|_| QuadraticAgent {
                a: Array2::eye(d),
                b: Array1::zeros(d),
                c: 0.0,
            })
            .collect();
        Objective::quadratic(agents).unwrap()
    }

    fn logistic_fixture(n: usize, seed: u64) -> Objective {
        let data = Dataset::synthetic_two_class(n, 2, 2.0, seed).unwrap();
        let plan = PartitionPlan::make(n, None, 1, Scheme::Balanced, 0).unwrap();
        Objective::logistic_from_partition(&data, &plan, 1e-2).unwrap()
    }

    #[test]
    fn quadratic_eval_basics() {
        let obj = quad_identity(1, 2);
        assert_eq!(obj.eval(0, array![0.0, 0.0].view()).unwrap(), 0.0);

        let agents = vec![QuadraticAgent {
            a: Array2::eye(2) * 2.0,
            b: Array1::zeros(2),
            c: 0.0,
        }];
        let obj = Objective::quadratic(agents).unwrap();
        assert_eq!(obj.eval(0, array![1.0, 1.0].view()).unwrap(), 2.0);
    }

    #[test]
    fn quadratic_grad_is_a_theta_plus_b() {
        let obj = quad_identity(1, 3);
        let theta = array![0.3, -1.2, 2.5];
        let g = obj.grad(0, theta.view()).unwrap();
        assert!(g.is_full_batch);
        for (a, b) in g.value.iter().zip(theta.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_non_finite_theta() {
        let obj = quad_identity(1, 2);
        assert!(obj.eval(0, array![f64::NAN, 0.0].view()).is_err());
        assert!(obj.grad(0, array![f64::INFINITY, 0.0].view()).is_err());
    }

    #[test]
    fn rejects_indefinite_quadratic() {
        let agents = vec![QuadraticAgent {
            a: array![[1.0, 0.0], [0.0, -0.5]],
            b: Array1::zeros(2),
            c: 0.0,
        }];
        assert!(Objective::quadratic(agents).is_err());
    }

    #[test]
    fn logistic_loss_at_zero_is_n_ln2() {
        let obj = logistic_fixture(4, 3);
        let loss = obj.eval(0, array![0.0, 0.0].view()).unwrap();
        assert!((loss - 4.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn logistic_grad_at_zero_closed_form() {
        // two-point set: grad at 0 is -1/2 sum_i y_i x_i (ridge term vanishes)
        let data = Dataset {
            x: array![[1.0, 2.0], [-0.5, 1.0]],
            y: array![1.0, -1.0],
            labels: vec![1, 0],
        };
        let plan = PartitionPlan::make(2, None, 1, Scheme::Balanced, 0).unwrap();
        let obj = Objective::logistic_from_partition(&data, &plan, 1e-2).unwrap();
        let g = obj.grad(0, array![0.0, 0.0].view()).unwrap().value;
        let expected = array![
            -0.5 * (1.0 * 1.0 + (-1.0) * -0.5),
            -0.5 * (1.0 * 2.0 + (-1.0) * 1.0)
        ];
        for (a, b) in g.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    fn finite_difference(obj: &Objective, j: usize, theta: &Array1<f64>) -> Array1<f64> {
        let norm = theta.dot(theta).sqrt();
        let h = 1e-6 * (1.0 + norm);
        let mut fd = Array1::zeros(theta.len());
        for k in 0..theta.len() {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[k] += h;
            minus[k] -= h;
            fd[k] = (obj.eval(j, plus.view()).unwrap() - obj.eval(j, minus.view()).unwrap())
                / (2.0 * h);
        }
        fd
    }

    fn assert_fd_close(obj: &Objective, seed: u64) {
        let d = obj.dimension();
        let mut r = rng::agent_stream(seed, 0, 0);
        for j in 0..obj.n_agents() {
            for _ in 0..10 {
                let theta = Array1::from_iter((0..d).map(|_| StandardNormal.sample(&mut r)));
                let g = obj.grad(j, theta.view()).unwrap().value;
                let fd = finite_difference(obj, j, &theta);
                let diff = (&g - &fd).dot(&(&g - &fd)).sqrt();
                let scale = g.dot(&g).sqrt().max(1e-8);
                assert!(diff / scale < 1e-5, "agent {j}: rel error {}", diff / scale);
            }
        }
    }

    #[test]
    fn finite_difference_audit_all_kinds() {
        assert_fd_close(&Objective::random_quadratic(2, 3, 0.5, 3.0, 11).unwrap(), 1);
        assert_fd_close(&logistic_fixture(12, 5), 2);

        let data = Dataset::synthetic_two_class(10, 3, 2.0, 7).unwrap();
        let plan = PartitionPlan::make(10, None, 2, Scheme::Balanced, 1).unwrap();
        let mlp = Objective::mlp_from_partition(&data, &plan, 4).unwrap();
        assert_fd_close(&mlp, 3);
    }

    #[test]
    fn stochastic_full_batch_equals_grad() {
        let obj = logistic_fixture(6, 2);
        let theta = array![0.4, -0.3];
        let mut r = rng::agent_stream(1, 0, 0);
        let s = obj.stochastic_grad(0, theta.view(), 6, &mut r).unwrap();
        assert!(s.is_full_batch);
        let g = obj.grad(0, theta.view()).unwrap();
        assert_eq!(s.value, g.value);
    }

    #[test]
    fn stochastic_rejects_oversized_batch() {
        let obj = logistic_fixture(4, 2);
        let mut r = rng::agent_stream(1, 0, 0);
        assert!(obj
            .stochastic_grad(0, array![0.0, 0.0].view(), 5, &mut r)
            .is_err());
    }

    #[test]
    fn stochastic_same_seed_same_draw() {
        let obj = logistic_fixture(8, 2);
        let theta = array![0.1, 0.2];
        let a = obj
            .stochastic_grad(0, theta.view(), 3, &mut rng::agent_stream(9, 0, 4))
            .unwrap();
        let b = obj
            .stochastic_grad(0, theta.view(), 3, &mut rng::agent_stream(9, 0, 4))
            .unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.batch_indices, b.batch_indices);
    }

    #[test]
    fn unbiasedness_by_exhaustive_enumeration() {
        // mean over all (n choose b) batches equals the exact gradient
        let obj = logistic_fixture(5, 13);
        let theta = array![0.7, -0.2];
        let exact = obj.grad(0, theta.view()).unwrap().value;
        for b in 1..=5usize {
            let mut mean = Array1::zeros(2);
            let mut count = 0usize;
            for batch in (0..5usize).combinations(b) {
                mean = mean + obj.grad_on_batch(0, theta.view(), &batch).unwrap();
                count += 1;
            }
            mean /= count as f64;
            for (m, e) in mean.iter().zip(exact.iter()) {
                assert!((m - e).abs() < 1e-12, "b={b}: {m} vs {e}");
            }
        }
    }

    #[test]
    fn constants_scaled_identity() {
        let agents = vec![
            QuadraticAgent {
                a: Array2::eye(2),
                b: Array1::zeros(2),
                c: 0.0,
            },
            QuadraticAgent {
                a: Array2::eye(2) * 3.0,
                b: Array1::zeros(2),
                c: 0.0,
            },
        ];
        let obj = Objective::quadratic(agents).unwrap();
        let c = obj.constants().unwrap();
        assert!((c.h_strong - 1.0).abs() < 1e-12);
        assert!((c.gamma_smooth - 3.0).abs() < 1e-12);

        let single = quad_identity(1, 4);
        let c = single.constants().unwrap();
        assert!((c.gamma_smooth / c.h_strong - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mlp_constants_flagged_nonconvex() {
        let data = Dataset::synthetic_two_class(8, 2, 2.0, 3).unwrap();
        let plan = PartitionPlan::make(8, None, 2, Scheme::Balanced, 0).unwrap();
        let mlp = Objective::mlp_from_partition(&data, &plan, 3).unwrap();
        assert!(matches!(mlp.constants(), Err(Error::NonconvexConstants(_))));
    }

    #[test]
    fn logistic_smoothness_bound_dominates_hessian_grid() {
        // brute-force max Hessian eigenvalue over a theta grid on a 2-d
        // problem never exceeds the analytic bound
        let obj = logistic_fixture(10, 21);
        let c = obj.constants().unwrap();
        let shard = &obj.shards().unwrap()[0];
        let ridge = 1e-2;
        let mut worst: f64 = 0.0;
        for a in -3..=3 {
            for b in -3..=3 {
                let theta = array![a as f64 * 0.5, b as f64 * 0.5];
                let mut hess = Array2::eye(2) * ridge;
                for i in 0..shard.x.nrows() {
                    let xi = shard.x.row(i);
                    let z = xi.dot(&theta) * shard.y[i];
                    let w = sigmoid(z) * sigmoid(-z);
                    for p in 0..2 {
                        for q in 0..2 {
                            hess[[p, q]] += w * xi[p] * xi[q];
                        }
                    }
                }
                let eigs = linalg::symmetric_eigenvalues(&hess).unwrap();
                worst = worst.max(eigs[0]);
            }
        }
        assert!(
            worst <= c.gamma_smooth + 1e-10,
            "grid max {worst} exceeds bound {}",
            c.gamma_smooth
        );
    }

    #[test]
    fn strong_convexity_and_smoothness_witnesses() {
        let obj = Objective::random_quadratic(2, 3, 0.8, 4.0, 5).unwrap();
        let c = obj.constants().unwrap();
        let mut r = rng::agent_stream(17, 0, 0);
        for j in 0..2 {
            let (h_j, gamma_j) = c.per_agent[j];
            for _ in 0..100 {
                let x = Array1::from_iter((0..3).map(|_| {
                    let v: f64 = StandardNormal.sample(&mut r);
                    v
                }));
                let y = Array1::from_iter((0..3).map(|_| {
                    let v: f64 = StandardNormal.sample(&mut r);
                    v
                }));
                let fx = obj.eval(j, x.view()).unwrap();
                let fy = obj.eval(j, y.view()).unwrap();
                let gx = obj.grad(j, x.view()).unwrap().value;
                let diff = &y - &x;
                let lin = fx + gx.dot(&diff);
                let sq = diff.dot(&diff);
                assert!(
                    fy >= lin + 0.5 * h_j * sq - 1e-9,
                    "strong convexity witness"
                );
                assert!(fy <= lin + 0.5 * gamma_j * sq + 1e-9, "smoothness witness");
            }
        }
    }

    #[test]
    fn accuracy_on_separable_data() {
        let data = Dataset {
            x: array![[2.0, 0.0], [-2.0, 0.0]],
            y: array![1.0, -1.0],
            labels: vec![1, 0],
        };
        let plan = PartitionPlan::make(2, None, 1, Scheme::Balanced, 0).unwrap();
        let obj = Objective::logistic_from_partition(&data, &plan, 1e-2).unwrap();
        let acc = obj
            .accuracy(array![1.0, 0.0].view(), &data.x, &data.y)
            .unwrap();
        assert_eq!(acc, 1.0);
    }
}
