//! Long-run behaviour of the Markov chain induced by a stationary policy.

use thiserror::Error;

use crate::linalg::{solve_linear_system, LinalgError, Matrix};
use crate::model::{
    reward_d, reward_n, reward_s, transition_distribution, LinkParameters, ModelError, Protocol,
};
use crate::policy::{Policy, PolicyError};

/// Stationary components in `[-NEG_CLAMP_TOL, 0)` are rounding noise.
pub const NEG_CLAMP_TOL: f64 = 1e-10;
pub const BALANCE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("chain is not unichain: {0}")]
    MultipleRecurrentClasses(String),
    #[error("balance residual {0:e} exceeds tolerance")]
    Inaccurate(f64),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub pi: Vec<f64>,
}

impl SteadyState {
    /// `max_j |(pi P)_j - pi_j|`.
    pub fn balance_residual(&self, kernel: &Matrix) -> f64 {
        kernel
            .vec_mul(&self.pi)
            .iter()
            .zip(&self.pi)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn total_variation(&self, other: &[f64]) -> f64 {
        0.5 * self.pi.iter().zip(other).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// Long-run rates of one policy. `new_packet_rate = drop_rate + throughput`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerformancePoint {
    pub pdp: f64,
    pub throughput: f64,
    pub new_packet_rate: f64,
    pub drop_rate: f64,
}

impl PerformancePoint {
    /// `|new_packet_rate - drop_rate - throughput|`.
    pub fn identity_residual(&self) -> f64 {
        (self.new_packet_rate - self.drop_rate - self.throughput).abs()
    }
}

/// `P[s][s'] = sum_a psi(a|s) P(s'|s,a)`.
pub fn induced_kernel(
    policy: &Policy,
    params: &LinkParameters,
    protocol: Protocol,
) -> Result<Matrix, ChainError> {
    policy.validate(params, protocol)?;
    let space = params.state_space();
    let n = space.len();
    let mut kernel = Matrix::zeros(n, n);
    for (idx, state) in space.iter().enumerate() {
        for &(action, weight) in policy.rule(idx) {
            if weight == 0.0 {
                continue;
            }
            for entry in transition_distribution(&state, action, params)? {
                kernel[(idx, space.index(&entry.next_state))] += weight * entry.probability;
            }
        }
    }
    Ok(kernel)
}

/// Unique stationary distribution of a row-stochastic `kernel`.
pub fn stationary_distribution(kernel: &Matrix) -> Result<SteadyState, ChainError> {
    let all: Vec<usize> = (0..kernel.rows()).collect();
    stationary_on(kernel, &all)
}

/// Stationary distribution of the chain started in `initial`: only states
/// reachable from those states are considered, and they must contain a
/// single recurrent class. Unreachable states get zero mass.
pub fn stationary_distribution_from(
    kernel: &Matrix,
    initial: &[usize],
) -> Result<SteadyState, ChainError> {
    let n = kernel.rows();
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = initial.to_vec();
    for &s in initial {
        seen[s] = true;
    }
    while let Some(s) = stack.pop() {
        for (t, &p) in kernel.row(s).iter().enumerate() {
            if p > 0.0 && !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    let reachable: Vec<usize> = (0..n).filter(|&s| seen[s]).collect();
    stationary_on(kernel, &reachable)
}

fn stationary_on(kernel: &Matrix, support: &[usize]) -> Result<SteadyState, ChainError> {
    let m = support.len();
    if m == 0 {
        return Err(ChainError::MultipleRecurrentClasses("empty state set".into()));
    }
    // Balance equations sum_r pi_r P[r][j] - pi_j = 0, last one replaced by sum pi = 1.
    let mut a = Matrix::zeros(m, m);
    for (j, &sj) in support.iter().enumerate() {
        for (r, &sr) in support.iter().enumerate() {
            a[(j, r)] = kernel[(sr, sj)];
        }
        a[(j, j)] -= 1.0;
    }
    a.row_mut(m - 1).fill(1.0);
    let mut rhs = vec![0.0; m];
    rhs[m - 1] = 1.0;
    let local = solve_linear_system(&a, &rhs).map_err(|e| match e {
        LinalgError::SingularSystem { column, .. } => ChainError::MultipleRecurrentClasses(format!(
            "balance equations are singular at column {column}"
        )),
        other => ChainError::MultipleRecurrentClasses(other.to_string()),
    })?;
    if let Some(&worst) = local.iter().filter(|&&v| v < -NEG_CLAMP_TOL).min_by(|a, b| a.total_cmp(b)) {
        return Err(ChainError::MultipleRecurrentClasses(format!(
            "stationary solve produced a negative component {worst:e}"
        )));
    }
    let mut pi = vec![0.0; kernel.rows()];
    for (&s, &v) in support.iter().zip(&local) {
        pi[s] = v.max(0.0);
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    let steady = SteadyState { pi };
    let residual = steady.balance_residual(kernel);
    if residual > BALANCE_TOL {
        return Err(ChainError::Inaccurate(residual));
    }
    Ok(steady)
}

/// Rates under `policy` given its stationary distribution.
pub fn performance_from(
    steady: &SteadyState,
    policy: &Policy,
    params: &LinkParameters,
) -> PerformancePoint {
    let space = params.state_space();
    let (mut drop_rate, mut new_packet_rate, mut throughput) = (0.0, 0.0, 0.0);
    for (idx, state) in space.iter().enumerate() {
        let mass = steady.pi[idx];
        if mass == 0.0 {
            continue;
        }
        for &(a, w) in policy.rule(idx) {
            drop_rate += mass * w * reward_d(&state, a, params);
            new_packet_rate += mass * w * reward_n(&state, a);
            throughput += mass * w * reward_s(&state, a, params);
        }
    }
    PerformancePoint { pdp: drop_rate / new_packet_rate, throughput, new_packet_rate, drop_rate }
}

#[derive(Debug, Clone)]
pub struct PolicyAnalysis {
    pub kernel: Matrix,
    pub steady: SteadyState,
    pub point: PerformancePoint,
}

/// Kernel, stationary distribution (from the first-slot states) and rates.
pub fn analyze_policy(
    policy: &Policy,
    params: &LinkParameters,
    protocol: Protocol,
) -> Result<PolicyAnalysis, ChainError> {
    let kernel = induced_kernel(policy, params, protocol)?;
    let space = params.state_space();
    let initial: Vec<usize> = params.initial_states().iter().map(|s| space.index(s)).collect();
    let steady = stationary_distribution_from(&kernel, &initial)?;
    let point = performance_from(&steady, policy, params);
    Ok(PolicyAnalysis { kernel, steady, point })
}

pub fn evaluate_policy(
    policy: &Policy,
    params: &LinkParameters,
    protocol: Protocol,
) -> Result<PerformancePoint, ChainError> {
    analyze_policy(policy, params, protocol).map(|a| a.point)
}
