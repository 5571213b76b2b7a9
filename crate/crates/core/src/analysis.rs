//! Closed-form quantities attached to the consensus dynamics: Lyapunov
//! values and gradients, consensus and optimality bounds, contraction
//! constants, omega thresholds, and brute-force oracles for verifying them
//! at desk scale.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmKind, HyperParams};
use crate::error::{Error, Result};
use crate::linalg;
use crate::objectives::{ConvexConstants, Objective};
use crate::topology::InteractionMatrix;

/// Which Lyapunov function the analysis is phrased in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LyapunovKind {
    /// V = omega F + (1 - omega)/(2 alpha) Theta' (I - P) Theta.
    Generalized { omega: f64 },
    /// V = F + (2 alpha)^-1 Theta' (I - P^tau) Theta.
    Incremental { tau: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct LyapunovSpec {
    pub kind: LyapunovKind,
    pub alpha: f64,
}

impl LyapunovSpec {
    pub fn generalized(omega: f64, alpha: f64) -> Result<Self> {
        if !(omega > 0.0 && omega <= 1.0) {
            return Err(Error::InvalidHyperParams(format!(
                "omega must lie in (0, 1], got {omega}"
            )));
        }
        Self::check_alpha(alpha)?;
        Ok(LyapunovSpec {
            kind: LyapunovKind::Generalized { omega },
            alpha,
        })
    }

    pub fn incremental(tau: usize, alpha: f64) -> Result<Self> {
        if tau == 0 {
            return Err(Error::InvalidHyperParams("tau must be >= 1".into()));
        }
        Self::check_alpha(alpha)?;
        Ok(LyapunovSpec {
            kind: LyapunovKind::Incremental { tau },
            alpha,
        })
    }

    fn check_alpha(alpha: f64) -> Result<()> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidHyperParams(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        Ok(())
    }

    /// (objective weight, penalty coefficient, mixing power): every variant
    /// is V = w_f F + c Theta' (I - P^t) Theta.
    fn decompose(&self) -> (f64, f64, usize) {
        match self.kind {
            LyapunovKind::Generalized { omega } => (omega, (1.0 - omega) / (2.0 * self.alpha), 1),
            LyapunovKind::Incremental { tau } => (1.0, 1.0 / (2.0 * self.alpha), tau),
        }
    }

    /// Strong-convexity constant of V given the objective's H_m.
    pub fn h_hat(&self, pi: &InteractionMatrix, h_m: f64) -> f64 {
        match self.kind {
            LyapunovKind::Generalized { omega } => {
                omega * h_m + (1.0 - omega) / (2.0 * self.alpha) * (1.0 - pi.lambda2())
            }
            LyapunovKind::Incremental { tau } => {
                h_m + (1.0 - pi.lambda2().powi(tau as i32)) / (2.0 * self.alpha)
            }
        }
    }

    /// Smoothness constant of V given the objective's gamma_m.
    pub fn gamma_hat(&self, pi: &InteractionMatrix, gamma_m: f64) -> f64 {
        match self.kind {
            LyapunovKind::Generalized { omega } => {
                omega * gamma_m + (1.0 - omega) / self.alpha * (1.0 - pi.lambda_n())
            }
            LyapunovKind::Incremental { tau } => {
                gamma_m + (1.0 - pi.lambda_n().powi(tau as i32)) / self.alpha
            }
        }
    }
}

/// V(Theta) for the chosen variant. The disagreement penalty is evaluated
/// blockwise; the Kronecker-lifted matrix is never formed.
pub fn lyapunov_value(
    theta: &Array2<f64>,
    obj: &Objective,
    pi: &InteractionMatrix,
    spec: &LyapunovSpec,
) -> Result<f64> {
    check_dims(theta, obj, pi)?;
    let (w_f, c, t) = spec.decompose();
    let f = obj.total_loss(theta)?;
    let mixed = pi.mix(theta, t);
    let penalty: f64 = theta
        .iter()
        .zip(mixed.iter())
        .map(|(&a, &m)| a * (a - m))
        .sum();
    Ok(w_f * f + c * penalty)
}

/// Exact gradient of V, one row per agent:
/// w_f grad F + 2 c (I - Pi^t) Theta.
pub fn lyapunov_gradient(
    theta: &Array2<f64>,
    obj: &Objective,
    pi: &InteractionMatrix,
    spec: &LyapunovSpec,
) -> Result<Array2<f64>> {
    check_dims(theta, obj, pi)?;
    let (w_f, c, t) = spec.decompose();
    let g = obj.full_gradient_matrix(theta)?;
    let mixed = pi.mix(theta, t);
    Ok(w_f * &g + 2.0 * c * (theta - &mixed))
}

/// Minibatch version of `lyapunov_gradient`. Batch draws are keyed by
/// (master seed, agent, iteration), matching the algorithm steps, so the
/// same triple yields the gradient the corresponding step actually used.
pub fn stochastic_lyapunov_gradient(
    theta: &Array2<f64>,
    obj: &Objective,
    pi: &InteractionMatrix,
    spec: &LyapunovSpec,
    batch_size: usize,
    master_seed: u64,
    iteration: usize,
) -> Result<Array2<f64>> {
    check_dims(theta, obj, pi)?;
    let (w_f, c, t) = spec.decompose();
    let g = obj.stochastic_gradient_matrix(theta, batch_size, master_seed, iteration)?;
    let mixed = pi.mix(theta, t);
    Ok(w_f * &g + 2.0 * c * (theta - &mixed))
}

/// max_j |theta_j - mean| over agent rows.
pub fn consensus_error(theta: &Array2<f64>) -> f64 {
    let n = theta.nrows() as f64;
    let mean = theta.sum_axis(ndarray::Axis(0)) / n;
    (0..theta.nrows())
        .map(|j| {
            let diff = &theta.row(j) - &mean;
            diff.dot(&diff).sqrt()
        })
        .fold(0.0, f64::max)
}

/// A closed-form bound that may legitimately be infinite.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConsensusBound {
    pub value: f64,
    pub infinite: bool,
}

/// Steady-state consensus bound: omega alpha h / (1 - lambda2_hat) for the
/// generalized kind (lambda2_hat = (1-omega) lambda2 + omega), and
/// alpha h / (1 - lambda2^tau) for the incremental kind. h is the gradient
/// norm bound, typically trajectory-empirical.
pub fn consensus_bound(
    kind: LyapunovKind,
    pi: &InteractionMatrix,
    h: f64,
    alpha: f64,
) -> Result<ConsensusBound> {
    if !(h >= 0.0 && alpha > 0.0) {
        return Err(Error::InvalidHyperParams(format!(
            "need h >= 0 and alpha > 0, got h={h}, alpha={alpha}"
        )));
    }
    match kind {
        LyapunovKind::Generalized { omega } => {
            if omega >= 1.0 {
                return Ok(ConsensusBound {
                    value: f64::INFINITY,
                    infinite: true,
                });
            }
            let lambda2_hat = (1.0 - omega) * pi.lambda2() + omega;
            Ok(ConsensusBound {
                value: omega * alpha * h / (1.0 - lambda2_hat),
                infinite: false,
            })
        }
        LyapunovKind::Incremental { tau } => Ok(ConsensusBound {
            value: alpha * h / (1.0 - pi.lambda2().powi(tau as i32)),
            infinite: false,
        }),
    }
}

/// Per-step contraction constants of the strongly convex recursions
/// D_{k+1} <= decay D_k + noise.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConvergenceConstants {
    pub decay: f64,
    pub noise: f64,
    /// decay in (0, 1); when false the recursion gives no contraction.
    pub contractive: bool,
}

pub fn convergence_constants(
    kind: LyapunovKind,
    pi: &InteractionMatrix,
    constants: &ConvexConstants,
    hp: &HyperParams,
) -> Result<ConvergenceConstants> {
    hp.validate()?;
    let (h_m, gamma_m) = (constants.h_strong, constants.gamma_smooth);
    let lambda2 = pi.lambda2();
    let lambda_n = pi.lambda_n();
    let (decay, noise) = match kind {
        LyapunovKind::Generalized { omega } => {
            let decay =
                1.0 - (omega * hp.alpha * h_m + (1.0 - omega) / 2.0 * (1.0 - lambda2)) * hp.r1;
            let noise = (hp.alpha * hp.alpha * gamma_m * omega
                + hp.alpha * (1.0 - omega) * (1.0 - lambda_n))
                * hp.noise_b
                / 2.0;
            (decay, noise)
        }
        LyapunovKind::Incremental { tau } => {
            let l2t = lambda2.powi(tau as i32);
            let lnt = lambda_n.powi(tau as i32);
            let decay = 1.0 - (hp.alpha * h_m + 0.5 * (1.0 - l2t)) * hp.r1;
            let noise = (hp.alpha * hp.alpha * gamma_m + hp.alpha * (1.0 - lnt)) * hp.noise_b / 2.0;
            (decay, noise)
        }
    };
    Ok(ConvergenceConstants {
        decay,
        noise,
        contractive: decay > 0.0 && decay < 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusKind {
    Generalized,
    Incremental,
    GeneralizedMomentum,
    IncrementalMomentum,
    NonconvexGeneralized,
    NonconvexIncremental,
}

/// Asymptotic optimality radius: the steady-state upper bound on
/// V(Theta_k) - V* (or on the mean gradient norm for the nonconvex kinds).
/// Momentum kinds need the Lyapunov-gradient bound `g_bound`; strongly
/// convex kinds need H_m; nonconvex kinds need only gamma_m (an estimate is
/// acceptable there).
pub fn optimality_radius(
    kind: RadiusKind,
    pi: &InteractionMatrix,
    h_m: Option<f64>,
    gamma_m: f64,
    hp: &HyperParams,
    g_bound: Option<f64>,
) -> Result<f64> {
    hp.validate()?;
    let need_h = || {
        h_m.ok_or_else(|| {
            Error::NonconvexConstants(format!("{kind:?} radius needs the constant H_m"))
        })
    };
    let lambda2 = pi.lambda2();
    let lambda_n = pi.lambda_n();
    let (alpha, omega, b) = (hp.alpha, hp.omega, hp.noise_b);
    let tau = hp.tau as i32;
    let radius = match kind {
        RadiusKind::Generalized => {
            let h = need_h()?;
            b * (omega * alpha * gamma_m + (1.0 - omega) * (1.0 - lambda_n))
                / (2.0 * hp.r1 * (omega * h + (1.0 - omega) * (1.0 - lambda2) / alpha))
        }
        RadiusKind::Incremental => {
            let h = need_h()?;
            b * (alpha * gamma_m + 1.0 - lambda_n.powi(tau))
                / (2.0 * hp.r1 * (h + (1.0 - lambda2.powi(tau)) / alpha))
        }
        RadiusKind::NonconvexGeneralized => {
            (omega * gamma_m * alpha + (1.0 - omega) * (1.0 - lambda_n)) * b / hp.r1
        }
        RadiusKind::NonconvexIncremental => {
            (gamma_m * alpha + (1.0 - lambda_n.powi(tau))) * b / hp.r1
        }
        RadiusKind::GeneralizedMomentum | RadiusKind::IncrementalMomentum => {
            let h = need_h()?;
            let g = g_bound.ok_or_else(|| {
                Error::InvalidHyperParams("momentum radius needs the gradient bound G".into())
            })?;
            let spec = if kind == RadiusKind::GeneralizedMomentum {
                LyapunovSpec::generalized(omega, alpha)?
            } else {
                LyapunovSpec::incremental(hp.tau, alpha)?
            };
            let h_hat = spec.h_hat(pi, h);
            (alpha / h_hat).sqrt() * (b + hp.noise_bv * g * g)
        }
    };
    Ok(radius)
}

/// Omega regimes from comparing the generalized bounds with the incremental
/// and tau = 1 baselines.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OmegaThresholds {
    /// omega above this has a better optimality bound than the incremental
    /// variant at the given tau.
    pub lower_vs_incremental: f64,
    /// The comparison is meaningful only when A1 > 0, A2 > 0, A1 < A2.
    pub lower_vs_incremental_valid: bool,
    /// omega above this beats the tau = 1 baseline; always 1/2.
    pub lower_vs_baseline: f64,
    /// omega below this has a better consensus bound than the incremental
    /// variant: (1 - lambda2) / (2 - lambda2 - lambda2^tau).
    pub consensus_upper: f64,
}

pub fn omega_thresholds(
    pi: &InteractionMatrix,
    constants: &ConvexConstants,
    alpha: f64,
    tau: usize,
) -> Result<OmegaThresholds> {
    if !(alpha > 0.0) || tau == 0 {
        return Err(Error::InvalidHyperParams(format!(
            "need alpha > 0 and tau >= 1, got alpha={alpha}, tau={tau}"
        )));
    }
    let (h_m, gamma_m) = (constants.h_strong, constants.gamma_smooth);
    let t = tau as i32;
    let a = 1.0 - pi.lambda_n();
    let b = 1.0 - pi.lambda2();
    let e = 1.0 - pi.lambda_n().powi(t);
    let d = 1.0 - pi.lambda2().powi(t);
    let a1 = 2.0 * h_m * a - b * gamma_m + (b * e - d * a) / alpha;
    let a2 = 2.0 * h_m * (a + e) + (a * d - b * e) / alpha - gamma_m * (b + d);
    Ok(OmegaThresholds {
        lower_vs_incremental: a1 / a2,
        lower_vs_incremental_valid: a1 > 0.0 && a2 > 0.0 && a1 < a2,
        lower_vs_baseline: 0.5,
        // written as b / (b + d) so tau = 1 gives exactly 1/2
        consensus_upper: b / (b + d),
    })
}

/// Exact minimizer of V for quadratic agents: solves the stacked (N d)-dim
/// linear system grad V(Theta) = 0 and returns (Theta*, V*).
pub fn lyapunov_minimizer_oracle(
    obj: &Objective,
    pi: &InteractionMatrix,
    spec: &LyapunovSpec,
) -> Result<(Array2<f64>, f64)> {
    let agents = obj
        .quadratic_agents()
        .ok_or_else(|| Error::InvalidObjective("minimizer oracle needs quadratic agents".into()))?;
    let n = obj.n_agents();
    let d = obj.dimension();
    if pi.n_agents() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is for {} agents, objective has {n}",
            pi.n_agents()
        )));
    }
    let (w_f, c, t) = spec.decompose();
    // pi_t = Pi^t as a dense matrix
    let mut pi_t = Array2::eye(n);
    for _ in 0..t {
        pi_t = pi_t.dot(&pi.pi());
    }
    let dim = n * d;
    let mut system = Array2::zeros((dim, dim));
    let mut rhs = Array1::zeros(dim);
    for j in 0..n {
        for p in 0..d {
            let row = j * d + p;
            for q in 0..d {
                system[[row, j * d + q]] += w_f * agents[j].a[[p, q]];
            }
            rhs[row] = -w_f * agents[j].b[p];
            // 2 c (I - Pi^t) block, diagonal in the d-dimension
            for l in 0..n {
                let m = if l == j { 1.0 } else { 0.0 } - pi_t[[j, l]];
                system[[row, l * d + p]] += 2.0 * c * m;
            }
        }
    }
    let flat = linalg::solve(&system, &rhs)?;
    let theta_star =
        Array2::from_shape_vec((n, d), flat.to_vec()).expect("shape matches by construction");
    let grad = lyapunov_gradient(&theta_star, obj, pi, spec)?;
    let residual = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    if residual >= 1e-8 {
        return Err(Error::SingularSystem(format!(
            "minimizer residual {residual} too large"
        )));
    }
    let v_star = lyapunov_value(&theta_star, obj, pi, spec)?;
    Ok((theta_star, v_star))
}

/// Numerical V* for non-quadratic convex objectives: descend the exact
/// Lyapunov gradient until it nearly vanishes.
pub fn numerical_lyapunov_minimum(
    obj: &Objective,
    pi: &InteractionMatrix,
    spec: &LyapunovSpec,
    step: f64,
    max_iters: usize,
    grad_tol: f64,
) -> Result<(Array2<f64>, f64)> {
    let mut theta = Array2::zeros((obj.n_agents(), obj.dimension()));
    for _ in 0..max_iters {
        let g = lyapunov_gradient(&theta, obj, pi, spec)?;
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < grad_tol {
            let v = lyapunov_value(&theta, obj, pi, spec)?;
            return Ok((theta, v));
        }
        theta = theta - step * &g;
    }
    Err(Error::InsufficientData(format!(
        "Lyapunov descent did not reach gradient tolerance {grad_tol} in {max_iters} iterations"
    )))
}

/// Stochastic Lyapunov-gradient draws collected at one state, next to the
/// exact gradient at the same state.
#[derive(Debug, Clone)]
pub struct NoiseSamples {
    pub exact: Array2<f64>,
    pub draws: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub b: f64,
    pub b_v: f64,
    pub r1: f64,
    pub r2: f64,
}

const MIN_NOISE_DRAWS: usize = 30;

/// Fits Var[S] = B + B_V |grad V|^2 by least squares over the sampled
/// states (clamped to the nonnegative orthant) and reads r1 / r2 off the
/// observed mean-gradient ratios. These are estimates, not certificates.
pub fn empirical_noise_constants(samples: &[NoiseSamples]) -> Result<NoiseEstimate> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no noise samples".into()));
    }
    let mut xs = Vec::with_capacity(samples.len());
    let mut vars = Vec::with_capacity(samples.len());
    let mut r1 = f64::INFINITY;
    let mut r2: f64 = 0.0;
    for s in samples {
        if s.draws.len() < MIN_NOISE_DRAWS {
            return Err(Error::InsufficientData(format!(
                "need >= {MIN_NOISE_DRAWS} draws per state, got {}",
                s.draws.len()
            )));
        }
        let m = s.draws.len() as f64;
        let mut mean = Array2::zeros(s.exact.raw_dim());
        for d in &s.draws {
            mean += d;
        }
        mean /= m;
        let var = s
            .draws
            .iter()
            .map(|d| (d - &mean).iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / m;
        let exact_sq = s.exact.iter().map(|v| v * v).sum::<f64>();
        if exact_sq > 1e-20 {
            let dot: f64 = mean.iter().zip(s.exact.iter()).map(|(a, b)| a * b).sum();
            let mean_norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
            r1 = r1.min(dot / exact_sq);
            r2 = r2.max(mean_norm / exact_sq.sqrt());
        }
        xs.push(exact_sq);
        vars.push(var);
    }
    if !r1.is_finite() {
        return Err(Error::InsufficientData(
            "all sampled states have vanishing exact gradient".into(),
        ));
    }
    let (b, b_v) = nonneg_line_fit(&xs, &vars);
    Ok(NoiseEstimate { b, b_v, r1, r2 })
}

/// Least squares y = b + b_v x restricted to b, b_v >= 0.
fn nonneg_line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    let (mut b, mut b_v) = if det.abs() > 1e-30 {
        ((sy * sxx - sx * sxy) / det, (n * sxy - sx * sy) / det)
    } else {
        (sy / n, 0.0)
    };
    if b_v < 0.0 {
        b_v = 0.0;
        b = sy / n;
    }
    if b < 0.0 {
        b = 0.0;
        b_v = if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 };
    }
    (b.max(0.0), b_v.max(0.0))
}

/// Convenience sampler feeding `empirical_noise_constants` from an objective
/// and a list of states. Draw i at a state uses iteration index i, so the
/// draws are independent but reproducible.
pub fn sample_noise(
    obj: &Objective,
    pi: &InteractionMatrix,
    spec: &LyapunovSpec,
    states: &[Array2<f64>],
    batch_size: usize,
    n_draws: usize,
    master_seed: u64,
) -> Result<Vec<NoiseSamples>> {
    let mut out = Vec::with_capacity(states.len());
    for (si, theta) in states.iter().enumerate() {
        let exact = lyapunov_gradient(theta, obj, pi, spec)?;
        let mut draws = Vec::with_capacity(n_draws);
        for i in 0..n_draws {
            draws.push(stochastic_lyapunov_gradient(
                theta,
                obj,
                pi,
                spec,
                batch_size,
                master_seed.wrapping_add(si as u64),
                i,
            )?);
        }
        out.push(NoiseSamples { exact, draws });
    }
    Ok(out)
}

/// Every closed-form bound relevant to one algorithm configuration, with a
/// formula string recorded next to each number.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub algorithm: String,
    pub consensus_bound: Option<ConsensusBound>,
    pub optimality_radius: Option<f64>,
    pub decay_constant: Option<f64>,
    pub noise_constant: Option<f64>,
    pub contractive: Option<bool>,
    pub momentum_radius: Option<f64>,
    pub admissible_alpha_max: Option<f64>,
    pub admissible_alpha_error: Option<String>,
    pub formulas: BTreeMap<String, String>,
}

impl BoundReport {
    /// Assembles the report for one algorithm kind. `h` is the empirical
    /// gradient-norm bound and `g_bound` the empirical Lyapunov-gradient
    /// bound; both may come from a recorded trajectory.
    pub fn compute(
        kind: AlgorithmKind,
        pi: &InteractionMatrix,
        constants: Option<&ConvexConstants>,
        hp: &HyperParams,
        h: f64,
        g_bound: Option<f64>,
        lambda_n_tau_variant: bool,
    ) -> Result<BoundReport> {
        hp.validate()?;
        let hp = effective_hp(kind, hp);
        let hp = &hp;
        let mut formulas = BTreeMap::new();
        let lyap_kind = match kind {
            AlgorithmKind::Sgd | AlgorithmKind::GCdsgd | AlgorithmKind::GCdmsgd => {
                LyapunovKind::Generalized { omega: hp.omega }
            }
            AlgorithmKind::Cdsgd | AlgorithmKind::Cdmsgd => LyapunovKind::Incremental { tau: 1 },
            AlgorithmKind::ICdsgd | AlgorithmKind::ICdmsgd => {
                LyapunovKind::Incremental { tau: hp.tau }
            }
        };

        let cb = consensus_bound(lyap_kind, pi, h, hp.alpha)?;
        match lyap_kind {
            LyapunovKind::Generalized { .. } => formulas.insert(
                "consensus_bound".into(),
                "omega alpha h / (1 - ((1-omega) lambda_2 + omega))".into(),
            ),
            LyapunovKind::Incremental { .. } => formulas.insert(
                "consensus_bound".into(),
                "alpha h / (1 - lambda_2^tau)".into(),
            ),
        };

        let mut report = BoundReport {
            algorithm: kind.name().into(),
            consensus_bound: Some(cb),
            optimality_radius: None,
            decay_constant: None,
            noise_constant: None,
            contractive: None,
            momentum_radius: None,
            admissible_alpha_max: None,
            admissible_alpha_error: None,
            formulas,
        };

        if let Some(c) = constants {
            let cc = convergence_constants(lyap_kind, pi, c, hp)?;
            report.decay_constant = Some(cc.decay);
            report.noise_constant = Some(cc.noise);
            report.contractive = Some(cc.contractive);
            match lyap_kind {
                LyapunovKind::Generalized { .. } => {
                    report.formulas.insert(
                        "decay_constant".into(),
                        "1 - (omega alpha H_m + (1-omega)/2 (1-lambda_2)) r1".into(),
                    );
                    report.formulas.insert(
                        "noise_constant".into(),
                        "(alpha^2 gamma_m omega + alpha (1-omega)(1-lambda_N)) B / 2".into(),
                    );
                }
                LyapunovKind::Incremental { .. } => {
                    report.formulas.insert(
                        "decay_constant".into(),
                        "1 - (alpha H_m + (1-lambda_2^tau)/2) r1".into(),
                    );
                    report.formulas.insert(
                        "noise_constant".into(),
                        "(alpha^2 gamma_m + alpha (1-lambda_N^tau)) B / 2".into(),
                    );
                }
            }

            let radius_kind = match kind {
                AlgorithmKind::Sgd | AlgorithmKind::GCdsgd => RadiusKind::Generalized,
                AlgorithmKind::Cdsgd | AlgorithmKind::ICdsgd => RadiusKind::Incremental,
                AlgorithmKind::GCdmsgd => RadiusKind::GeneralizedMomentum,
                AlgorithmKind::Cdmsgd | AlgorithmKind::ICdmsgd => RadiusKind::IncrementalMomentum,
            };
            if kind.uses_momentum() {
                if let Some(g) = g_bound {
                    report.momentum_radius = Some(optimality_radius(
                        radius_kind,
                        pi,
                        Some(c.h_strong),
                        c.gamma_smooth,
                        hp,
                        Some(g),
                    )?);
                    report.formulas.insert(
                        "momentum_radius".into(),
                        "sqrt(alpha / H_hat) (B + B_V G^2)".into(),
                    );
                }
            } else {
                report.optimality_radius = Some(optimality_radius(
                    radius_kind,
                    pi,
                    Some(c.h_strong),
                    c.gamma_smooth,
                    hp,
                    None,
                )?);
                match radius_kind {
                    RadiusKind::Generalized => report.formulas.insert(
                        "optimality_radius".into(),
                        "B (omega alpha gamma_m + (1-omega)(1-lambda_N)) / (2 r1 (omega H_m + (1-omega)(1-lambda_2)/alpha))".into(),
                    ),
                    _ => report.formulas.insert(
                        "optimality_radius".into(),
                        "B (alpha gamma_m + 1 - lambda_N^tau) / (2 r1 (H_m + (1-lambda_2^tau)/alpha))".into(),
                    ),
                };
            }

            match crate::algorithms::max_step_size(kind, pi, c, hp, lambda_n_tau_variant) {
                Ok(a) => report.admissible_alpha_max = Some(a),
                Err(e) => report.admissible_alpha_error = Some(e.to_string()),
            }
        }
        Ok(report)
    }
}

/// tau is pinned to 1 for the baseline (non-incremental) kinds.
fn effective_hp(kind: AlgorithmKind, hp: &HyperParams) -> HyperParams {
    let mut hp = hp.clone();
    if matches!(kind, AlgorithmKind::Cdsgd | AlgorithmKind::Cdmsgd) {
        hp.tau = 1;
    }
    if matches!(kind, AlgorithmKind::Sgd) {
        hp.omega = 1.0;
    }
    hp
}

fn check_dims(theta: &Array2<f64>, obj: &Objective, pi: &InteractionMatrix) -> Result<()> {
    if theta.nrows() != pi.n_agents() || theta.nrows() != obj.n_agents() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} rows, matrix {} agents, objective {} agents",
            theta.nrows(),
            pi.n_agents(),
            obj.n_agents()
        )));
    }
    if theta.ncols() != obj.dimension() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} columns, objective dimension is {}",
            theta.ncols(),
            obj.dimension()
        )));
    }
    Ok(())
}
