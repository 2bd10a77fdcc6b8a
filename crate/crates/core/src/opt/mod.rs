//! Optimal and baseline reception policies.
//!
//! * Without feedback the throughput-greedy policy is optimal, and the
//!   constrained problem reduces to a feasibility check on it.
//! * With feedback the ratio objective (drops per new packet) is handled by
//!   Dinkelbach iterations over an occupation-measure LP.
//! * Small instances can be solved by enumerating deterministic policies,
//!   which is used as an oracle for both of the above.

mod brute_force;
mod cmdp;
mod dinkelbach;
mod myopic;

pub use brute_force::{
    brute_force_best_policy, enumerate_deterministic, policy_count, BruteForceObjective,
    BruteForceReport, MAX_ENUMERATED_POLICIES,
};
pub use cmdp::{
    build_weighted_lp, occupation_to_policy, CmdpModel, MeasureResiduals, OccupationMeasure,
};
pub use dinkelbach::{dinkelbach_solve, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
pub use myopic::{closed_forms_unconstrained, myopic_policy, solve_no_feedback, ClosedForms};

use thiserror::Error;

use crate::chain::ChainError;
use crate::lp::LpError;
use crate::model::{ModelError, Protocol};
use crate::policy::Policy;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("no convergence within {} iterations (last q = {:?})", .0.iterations, .0.q_trace.last())]
    IterationLimit(Box<SolveReport>),
    #[error("{count} deterministic policies exceed the enumeration limit")]
    TooManyPolicies { count: u128 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub protocol: Protocol,
    pub status: SolveStatus,
    /// `None` when infeasible.
    pub policy: Option<Policy>,
    /// 1 when infeasible.
    pub pdp: f64,
    /// Achieved throughput; for an infeasible no-feedback link, the largest
    /// achievable one. NaN when unknown.
    pub throughput: f64,
    pub new_packet_rate: f64,
    /// `q` used in each LP solve, in order.
    pub q_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub occupation: Option<OccupationMeasure>,
}

impl SolveReport {
    pub(crate) fn infeasible(protocol: Protocol, throughput: f64) -> Self {
        SolveReport {
            protocol,
            status: SolveStatus::Infeasible,
            policy: None,
            pdp: 1.0,
            throughput,
            new_packet_rate: f64::NAN,
            q_trace: Vec::new(),
            iterations: 0,
            converged: true,
            occupation: None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn success_prob(&self) -> f64 {
        1.0 - self.pdp
    }
}
