use crate::lp::{solve_lp, LpError, LpStatus};
use crate::model::{LinkParameters, Protocol};

use super::cmdp::{occupation_to_policy, CmdpModel};
use super::{OptError, SolveReport, SolveStatus};

pub const DEFAULT_MAX_ITERATIONS: usize = 20;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Minimizes the long-run drop ratio under a throughput floor.
///
/// Starting from `q = 1`, each iteration solves the occupation-measure LP
/// for the cost `d - q n`. A value `W >= -tolerance` ends the search;
/// otherwise `q` becomes the drop ratio of the LP optimum. The returned drop
/// probability and throughput are read off the final occupation measure.
pub fn dinkelbach_solve(
    params: &LinkParameters,
    protocol: Protocol,
    min_throughput: f64,
    max_iterations: usize,
    tolerance: f64,
) -> Result<SolveReport, OptError> {
    if max_iterations == 0 {
        return Err(OptError::InvalidArgument("at least one iteration is required".into()));
    }
    if !(tolerance > 0.0) {
        return Err(OptError::InvalidArgument(format!("tolerance {tolerance} must be positive")));
    }
    if !(min_throughput >= 0.0) {
        return Err(OptError::InvalidArgument(format!("throughput floor {min_throughput}")));
    }
    let model = CmdpModel::new(params, protocol)?;
    let mut q = 1.0;
    let mut q_trace = Vec::with_capacity(max_iterations);
    let mut last: Option<SolveReport> = None;

    for iteration in 1..=max_iterations {
        q_trace.push(q);
        let outcome = solve_lp(&model.lp(q, min_throughput))?;
        match outcome.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                // The constraint set does not depend on q, so this can only
                // happen on the first solve.
                let mut report = SolveReport::infeasible(protocol, f64::NAN);
                report.q_trace = q_trace;
                report.iterations = iteration;
                return Ok(report);
            }
            LpStatus::Unbounded => {
                return Err(LpError::Malformed("occupation-measure LP reported unbounded".into()).into())
            }
        }
        let x = model.measure(&outcome.solution);
        let new_packet_rate = model.new_packet_rate(&x);
        let ratio = model.drop_rate(&x) / new_packet_rate;
        let converged = outcome.objective_value >= -tolerance;
        let report = SolveReport {
            protocol,
            status: SolveStatus::Optimal,
            policy: Some(occupation_to_policy(&x)),
            pdp: ratio,
            throughput: model.throughput(&x),
            new_packet_rate,
            q_trace: q_trace.clone(),
            iterations: iteration,
            converged,
            occupation: Some(x),
        };
        if converged {
            return Ok(report);
        }
        q = ratio;
        last = Some(report);
    }
    Err(OptError::IterationLimit(Box::new(last.expect("at least one iteration ran"))))
}
