//! Communication graphs and doubly stochastic interaction matrices.
//!
//! The interaction matrix mixes agent parameters once per consensus step.
//! All convergence bounds in [`crate::analysis`] are functions of its
//! spectrum, so this module also owns the eigenvalue bookkeeping.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance for row/column stochasticity and symmetry after normalization.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Undirected communication graph over `n_agents` nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_agents: usize,
    edges: BTreeSet<(usize, usize)>,
}

/// Built-in graph families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    Ring,
    Complete,
    Star,
}

/// Weight schemes for turning a graph into a doubly stochastic matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScheme {
    /// Metropolis weights: pi_jl = 1/(1 + max(deg_j, deg_l)) on edges, the
    /// diagonal absorbs the remainder. Doubly stochastic and symmetric on
    /// any connected graph.
    Metropolis,
    /// (I + Metropolis)/2. Positive semidefinite, so every eigenvalue is
    /// nonnegative; useful when a bound needs lambda_N >= 0.
    LazyMetropolis,
    /// The fixed reference matrix for the 5-agent ring: 0.34 on the
    /// diagonal, 0.33 for each neighbor.
    Ring5Reference,
}

impl Graph {
    /// Builds a graph from an explicit edge list. Rejects self-loops,
    /// out-of-range endpoints and disconnected graphs.
    pub fn from_edges(n_agents: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_agents < 2 {
            return Err(Error::InvalidGraph(format!(
                "need at least 2 agents, got {n_agents}"
            )));
        }
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at agent {a}")));
            }
            if a >= n_agents || b >= n_agents {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a},{b}) out of range for {n_agents} agents"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let g = Graph {
            n_agents,
            edges: set,
        };
        g.check_connected()?;
        Ok(g)
    }

    /// Builds one of the standard topologies.
    pub fn build(kind: TopologyKind, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGraph(format!(
                "need at least 2 agents, got {n}"
            )));
        }
        let edges: Vec<(usize, usize)> = match kind {
            TopologyKind::Ring => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            TopologyKind::Complete => (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect(),
            TopologyKind::Star => (1..n).map(|i| (0, i)).collect(),
        };
        Graph::from_edges(n, &edges)
    }

    /// Reads a plain-text edge list: first line `n`, then one `j l` pair per
    /// line (0-indexed). Blank lines and `#` comments are skipped.
    pub fn from_edge_list_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::InvalidGraph("empty edge-list file".into()))?
            .parse()
            .map_err(|e| Error::InvalidGraph(format!("bad agent count: {e}")))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            let a: usize = parts
                .next()
                .ok_or_else(|| Error::InvalidGraph(format!("bad edge line: {line}")))?
                .parse()
                .map_err(|e| Error::InvalidGraph(format!("bad edge line '{line}': {e}")))?;
            let b: usize = parts
                .next()
                .ok_or_else(|| Error::InvalidGraph(format!("bad edge line: {line}")))?
                .parse()
                .map_err(|e| Error::InvalidGraph(format!("bad edge line '{line}': {e}")))?;
            edges.push((a, b));
        }
        Graph::from_edges(n, &edges)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == v || b == v)
            .count()
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.n_agents;
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(a, b) in &self.edges {
                let u = if a == v {
                    b
                } else if b == v {
                    a
                } else {
                    continue;
                };
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        if let Some(unreached) = seen.iter().position(|s| !s) {
            return Err(Error::Disconnected(format!(
                "agent {unreached} unreachable from agent 0"
            )));
        }
        Ok(())
    }

    /// True if this is exactly the n-cycle 0-1-...-(n-1)-0.
    pub fn is_ring(&self) -> bool {
        let n = self.n_agents;
        if self.edges.len() != n {
            return false;
        }
        (0..n).all(|i| self.has_edge(i, (i + 1) % n))
    }
}

/// A validated doubly stochastic, symmetric interaction matrix with its
/// spectrum precomputed.
#[derive(Debug, Clone)]
pub struct InteractionMatrix {
    pi: Array2<f64>,
    eigenvalues: Vec<f64>,
}

impl InteractionMatrix {
    /// Builds the interaction matrix for a connected graph under the given
    /// weight scheme and validates every invariant (stochasticity, symmetry,
    /// sparsity pattern, lambda_2 < 1).
    pub fn build(graph: &Graph, scheme: WeightScheme) -> Result<Self> {
        let n = graph.n_agents();
        let pi = match scheme {
            WeightScheme::Metropolis => metropolis_weights(graph),
            WeightScheme::LazyMetropolis => {
                let m = metropolis_weights(graph);
                let mut lazy = Array2::eye(n);
                lazy += &m;
                lazy *= 0.5;
                lazy
            }
            WeightScheme::Ring5Reference => {
                if n != 5 || !graph.is_ring() {
                    return Err(Error::InvalidMatrix(format!(
                        "ring5-reference requires the 5-agent ring, got {n} agents, ring = {}",
                        graph.is_ring()
                    )));
                }
                let mut pi = Array2::zeros((5, 5));
                for j in 0..5 {
                    pi[[j, j]] = 0.34;
                    pi[[j, (j + 1) % 5]] = 0.33;
                    pi[[j, (j + 4) % 5]] = 0.33;
                }
                pi
            }
        };
        let m = Self::from_matrix_with_graph(pi, Some(graph))?;
        if m.lambda2() >= 1.0 - 1e-12 {
            return Err(Error::InvalidMatrix(format!(
                "lambda_2 = {} not strictly below 1",
                m.lambda2()
            )));
        }
        Ok(m)
    }

    /// Validates an externally supplied matrix (doubly stochastic, symmetric,
    /// top eigenvalue 1). Sparsity is checked only when a graph is given.
    pub fn from_matrix(pi: Array2<f64>) -> Result<Self> {
        Self::from_matrix_with_graph(pi, None)
    }

    fn from_matrix_with_graph(pi: Array2<f64>, graph: Option<&Graph>) -> Result<Self> {
        let n = pi.nrows();
        if pi.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "interaction matrix must be square, got {}x{}",
                pi.nrows(),
                pi.ncols()
            )));
        }
        for j in 0..n {
            let row: f64 = pi.row(j).sum();
            let col: f64 = pi.column(j).sum();
            if (row - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidMatrix(format!("row {j} sums to {row}")));
            }
            if (col - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidMatrix(format!("column {j} sums to {col}")));
            }
            for l in 0..n {
                if (pi[[j, l]] - pi[[l, j]]).abs() > STOCHASTIC_TOL {
                    return Err(Error::InvalidMatrix(format!(
                        "asymmetric at ({j},{l}): {} vs {}",
                        pi[[j, l]],
                        pi[[l, j]]
                    )));
                }
                if let Some(g) = graph {
                    if j != l && !g.has_edge(j, l) && pi[[j, l]] != 0.0 {
                        return Err(Error::InvalidMatrix(format!(
                            "nonzero weight {} on non-edge ({j},{l})",
                            pi[[j, l]]
                        )));
                    }
                }
            }
        }
        let eigenvalues = linalg::symmetric_eigenvalues(&pi)?;
        if (eigenvalues[0] - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidMatrix(format!(
                "top eigenvalue {} differs from 1",
                eigenvalues[0]
            )));
        }
        Ok(InteractionMatrix { pi, eigenvalues })
    }

    /// Identity mixing (no communication). Violates lambda_2 < 1 by design;
    /// only meaningful for decoupled-SGD comparisons.
    pub fn identity(n: usize) -> Self {
        InteractionMatrix {
            pi: Array2::eye(n),
            eigenvalues: vec![1.0; n],
        }
    }

    pub fn n_agents(&self) -> usize {
        self.pi.nrows()
    }

    pub fn pi(&self) -> ArrayView2<'_, f64> {
        self.pi.view()
    }

    /// Eigenvalues sorted in descending order; the first is 1.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Second-largest eigenvalue.
    pub fn lambda2(&self) -> f64 {
        self.eigenvalues[1]
    }

    /// Smallest eigenvalue.
    pub fn lambda_n(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    /// Applies `tau` consensus sweeps blockwise: each column of the N x d
    /// state matrix is multiplied by Pi^tau. The Kronecker product
    /// Pi (x) I_d is never materialized.
    pub fn mix(&self, theta: &Array2<f64>, tau: usize) -> Array2<f64> {
        let mut out = theta.clone();
        for _ in 0..tau {
            out = self.pi.dot(&out);
        }
        out
    }

    /// Spectrum of the lifted matrix Q = (1-omega) Pi + omega I as
    /// (lambda2_hat, full descending list). Each eigenvalue is the affine
    /// image (1-omega) lambda + omega of an eigenvalue of Pi.
    pub fn lifted_spectrum_q(&self, omega: f64) -> Result<(f64, Vec<f64>)> {
        if !(omega > 0.0 && omega <= 1.0) {
            return Err(Error::InvalidHyperParams(format!(
                "omega must lie in (0, 1], got {omega}"
            )));
        }
        let lifted: Vec<f64> = self
            .eigenvalues
            .iter()
            .map(|&l| (1.0 - omega) * l + omega)
            .collect();
        Ok((lifted[1], lifted))
    }

    /// Matrix content as CSV (one row per line, `,`-separated).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.pi.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
                first = false;
            }
            out.push('\n');
        }
        out
    }
}

/// Eigenvalues of a symmetric matrix, sorted descending. Rejects asymmetric
/// input.
pub fn spectrum(pi: &Array2<f64>) -> Result<Vec<f64>> {
    linalg::symmetric_eigenvalues(pi)
}

fn metropolis_weights(graph: &Graph) -> Array2<f64> {
    let n = graph.n_agents();
    let degrees: Vec<usize> = (0..n).map(|v| graph.degree(v)).collect();
    let mut pi = Array2::zeros((n, n));
    for (a, b) in graph.edges() {
        let w = 1.0 / (1.0 + degrees[a].max(degrees[b]) as f64);
        pi[[a, b]] = w;
        pi[[b, a]] = w;
    }
    for j in 0..n {
        let off: f64 = pi.row(j).sum();
        pi[[j, j]] = 1.0 - off;
    }
    pi
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ring5() -> Graph {
        Graph::build(TopologyKind::Ring, 5).unwrap()
    }

    #[test]
    fn ring_edges() {
        let g = ring5();
        let expected: Vec<(usize, usize)> = vec![(0, 1), (0, 4), (1, 2), (2, 3), (3, 4)];
        assert_eq!(g.edges().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn complete_k3_has_three_edges() {
        let g = Graph::build(TopologyKind::Complete, 3).unwrap();
        assert_eq!(g.n_edges(), 3);
    }

    #[test]
    fn disconnected_custom_rejected() {
        let err = Graph::from_edges(3, &[(0, 1)]).unwrap_err();
        assert!(matches!(err, Error::Disconnected(_)), "{err}");
    }

    #[test]
    fn self_loop_rejected() {
        assert!(Graph::from_edges(3, &[(0, 0), (0, 1), (1, 2)]).is_err());
    }

    #[test]
    fn ring5_reference_matrix_rows() {
        let m = InteractionMatrix::build(&ring5(), WeightScheme::Ring5Reference).unwrap();
        let pi = m.pi();
        for j in 0..5 {
            assert_eq!(pi[[j, j]], 0.34);
            assert_eq!(pi[[j, (j + 1) % 5]], 0.33);
            assert_eq!(pi[[j, (j + 4) % 5]], 0.33);
        }
    }

    #[test]
    fn ring5_reference_requires_5_ring() {
        let g = Graph::build(TopologyKind::Ring, 4).unwrap();
        assert!(InteractionMatrix::build(&g, WeightScheme::Ring5Reference).is_err());
        let star = Graph::build(TopologyKind::Star, 5).unwrap();
        assert!(InteractionMatrix::build(&star, WeightScheme::Ring5Reference).is_err());
    }

    #[test]
    fn k2_metropolis_is_uniform() {
        let g = Graph::build(TopologyKind::Complete, 2).unwrap();
        let m = InteractionMatrix::build(&g, WeightScheme::Metropolis).unwrap();
        assert_eq!(m.pi()[[0, 0]], 0.5);
        assert_eq!(m.pi()[[0, 1]], 0.5);
        let eigs = m.eigenvalues();
        assert!((eigs[0] - 1.0).abs() < 1e-12);
        assert!(eigs[1].abs() < 1e-12);
    }

    // Spectrum fixture for the fixed 5-ring matrix. A circulant matrix
    // [c0, c1, 0, 0, c1] has eigenvalues c0 + 2 c1 cos(2 pi k / 5); the
    // values below were computed from that closed form up front.
    #[test]
    fn ring5_reference_spectrum_fixture() {
        let m = InteractionMatrix::build(&ring5(), WeightScheme::Ring5Reference).unwrap();
        let expected_lambda2 = 0.34 + 0.66 * (2.0 * std::f64::consts::PI / 5.0).cos();
        let expected_lambda_n = 0.34 + 0.66 * (4.0 * std::f64::consts::PI / 5.0).cos();
        assert!((m.lambda2() - expected_lambda2).abs() < 1e-12);
        assert!((m.lambda_n() - expected_lambda_n).abs() < 1e-12);
        // Frozen numeric values.
        assert!((m.lambda2() - 0.5439512162874653).abs() < 1e-10);
        assert!((m.lambda_n() - (-0.19395121628746534)).abs() < 1e-10);
    }

    #[test]
    fn spectrum_power_property() {
        // spectrum(Pi^k) equals elementwise k-th powers of spectrum(Pi).
        let m = InteractionMatrix::build(&ring5(), WeightScheme::Ring5Reference).unwrap();
        let mut p = Array2::eye(5);
        for k in 1..=3usize {
            p = p.dot(&m.pi());
            let eigs = spectrum(&p).unwrap();
            let mut powered: Vec<f64> = m.eigenvalues().iter().map(|l| l.powi(k as i32)).collect();
            powered.sort_by(|x, y| y.partial_cmp(x).unwrap());
            for (a, b) in eigs.iter().zip(powered.iter()) {
                assert!((a - b).abs() < 1e-8, "k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn lifted_spectrum_matches_explicit_q() {
        let m = InteractionMatrix::build(&ring5(), WeightScheme::Ring5Reference).unwrap();
        for &omega in &[0.1, 0.5, 0.9] {
            let (l2_hat, lifted) = m.lifted_spectrum_q(omega).unwrap();
            let q = m.pi().to_owned() * (1.0 - omega) + Array2::<f64>::eye(5) * omega;
            let direct = spectrum(&q).unwrap();
            for (a, b) in lifted.iter().zip(direct.iter()) {
                assert!((a - b).abs() < 1e-10, "omega={omega}: {a} vs {b}");
            }
            assert!((l2_hat - ((1.0 - omega) * m.lambda2() + omega)).abs() < 1e-14);
        }
    }

    #[test]
    fn lifted_spectrum_omega_one_is_all_ones() {
        let m = InteractionMatrix::build(&ring5(), WeightScheme::Metropolis).unwrap();
        let (_, lifted) = m.lifted_spectrum_q(1.0).unwrap();
        assert!(lifted.iter().all(|&l| (l - 1.0).abs() < 1e-14));
        assert!(m.lifted_spectrum_q(0.0).is_err());
        assert!(m.lifted_spectrum_q(1.5).is_err());
    }

    #[test]
    fn k2_lifted_half() {
        let g = Graph::build(TopologyKind::Complete, 2).unwrap();
        let m = InteractionMatrix::build(&g, WeightScheme::Metropolis).unwrap();
        let (l2_hat, lifted) = m.lifted_spectrum_q(0.5).unwrap();
        assert!((lifted[0] - 1.0).abs() < 1e-12);
        assert!((l2_hat - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mix_tau2_matches_matrix_square() {
        let m = InteractionMatrix::build(&ring5(), WeightScheme::Ring5Reference).unwrap();
        let theta = array![
            [1.0, -2.0],
            [0.5, 0.0],
            [-1.5, 3.0],
            [2.0, 2.0],
            [0.0, -1.0]
        ];
        let p2 = m.pi().dot(&m.pi());
        let direct = p2.dot(&theta);
        let mixed = m.mix(&theta, 2);
        for (a, b) in direct.iter().zip(mixed.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn mix_preserves_mean_and_converges() {
        let m = InteractionMatrix::build(&ring5(), WeightScheme::Metropolis).unwrap();
        let theta = array![[1.0], [2.0], [3.0], [4.0], [5.0]];
        let mean = 3.0;
        let mixed = m.mix(&theta, 200);
        for v in mixed.iter() {
            assert!((v - mean).abs() < 1e-6, "Perron limit: {v}");
        }
        let once = m.mix(&theta, 1);
        let s: f64 = once.iter().sum::<f64>() / 5.0;
        assert!((s - mean).abs() < 1e-12);
    }

    #[test]
    fn edge_list_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.txt");
        std::fs::write(&path, "3\n0 1\n1 2\n").unwrap();
        let g = Graph::from_edge_list_file(&path).unwrap();
        assert_eq!(g.n_agents(), 3);
        assert_eq!(g.n_edges(), 2);

        std::fs::write(&path, "3\n0 1\n").unwrap();
        assert!(Graph::from_edge_list_file(&path).is_err());
    }

    #[test]
    fn lazy_metropolis_is_psd_on_ring() {
        let m = InteractionMatrix::build(&ring5(), WeightScheme::LazyMetropolis).unwrap();
        assert!(m.lambda_n() >= 0.0, "lambda_N = {}", m.lambda_n());
        // while plain Metropolis on the 5-ring is indefinite
        let plain = InteractionMatrix::build(&ring5(), WeightScheme::Metropolis).unwrap();
        assert!(plain.lambda_n() < 0.0);
    }

    #[test]
    fn csv_export_shape() {
        let g = Graph::build(TopologyKind::Complete, 2).unwrap();
        let m = InteractionMatrix::build(&g, WeightScheme::Metropolis).unwrap();
        assert_eq!(m.to_csv(), "0.5,0.5\n0.5,0.5\n");
    }
}
