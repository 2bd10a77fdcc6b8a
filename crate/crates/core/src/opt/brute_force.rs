use rayon::prelude::*;

use crate::chain::{evaluate_policy, ChainError, PerformancePoint};
use crate::model::{feasible_actions, Action, LinkParameters, Protocol};
use crate::policy::Policy;

use super::{OptError, SolveReport, SolveStatus};

pub const MAX_ENUMERATED_POLICIES: u128 = 100_000;
/// Improvements smaller than this do not displace an earlier policy.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BruteForceObjective {
    MaxThroughput,
    MinPdpSubjectTo(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceReport {
    pub report: SolveReport,
    /// Enumeration index of the winner.
    pub best_index: Option<u64>,
    pub evaluated: usize,
    /// Policies whose chain from the first-slot states is not unichain.
    pub skipped: usize,
}

fn action_sets(params: &LinkParameters, protocol: Protocol) -> Vec<Vec<Action>> {
    params.state_space().iter().map(|s| feasible_actions(&s, protocol, params)).collect()
}

/// Number of deterministic stationary policies.
pub fn policy_count(params: &LinkParameters, protocol: Protocol) -> u128 {
    action_sets(params, protocol)
        .iter()
        .try_fold(1u128, |acc, set| acc.checked_mul(set.len() as u128))
        .unwrap_or(u128::MAX)
}

fn decode(mut index: u64, sets: &[Vec<Action>]) -> Vec<Action> {
    // State 0 is the most significant digit.
    let mut choice = vec![Action::IDLE; sets.len()];
    for (slot, set) in choice.iter_mut().zip(sets).rev() {
        let radix = set.len() as u64;
        *slot = set[(index % radix) as usize];
        index /= radix;
    }
    choice
}

/// Every deterministic policy in lexicographic order with its evaluation.
pub fn enumerate_deterministic(
    params: &LinkParameters,
    protocol: Protocol,
) -> Result<Vec<(Policy, Result<PerformancePoint, ChainError>)>, OptError> {
    let count = policy_count(params, protocol);
    if count > MAX_ENUMERATED_POLICIES {
        return Err(OptError::TooManyPolicies { count });
    }
    let sets = action_sets(params, protocol);
    let space = params.state_space();
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| {
            let choice = decode(i, &sets);
            let policy = Policy::deterministic(space, |s| choice[space.index(s)]);
            let point = evaluate_policy(&policy, params, protocol);
            (policy, point)
        })
        .collect())
}

/// Best deterministic stationary policy by exhaustive enumeration; the
/// first policy in enumeration order wins ties.
pub fn brute_force_best_policy(
    params: &LinkParameters,
    protocol: Protocol,
    objective: BruteForceObjective,
) -> Result<BruteForceReport, OptError> {
    let all = enumerate_deterministic(params, protocol)?;
    let evaluated = all.len();
    let mut skipped = 0;
    let mut best: Option<(usize, PerformancePoint)> = None;
    for (i, (_, point)) in all.iter().enumerate() {
        let point = match point {
            Ok(p) => *p,
            Err(ChainError::MultipleRecurrentClasses(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.clone().into()),
        };
        let better = match (objective, &best) {
            (BruteForceObjective::MaxThroughput, None) => true,
            (BruteForceObjective::MaxThroughput, Some((_, b))) => point.throughput > b.throughput + TIE_TOL,
            (BruteForceObjective::MinPdpSubjectTo(floor), current) => {
                point.throughput >= floor - TIE_TOL
                    && current.is_none_or(|(_, b)| point.pdp < b.pdp - TIE_TOL)
            }
        };
        if better {
            best = Some((i, point));
        }
    }
    let report = match best {
        None => SolveReport::infeasible(protocol, f64::NAN),
        Some((i, point)) => SolveReport {
            protocol,
            status: SolveStatus::Optimal,
            policy: Some(all[i].0.clone()),
            pdp: point.pdp,
            throughput: point.throughput,
            new_packet_rate: point.new_packet_rate,
            q_trace: Vec::new(),
            iterations: 0,
            converged: true,
            occupation: None,
        },
    };
    Ok(BruteForceReport { report, best_index: best.map(|(i, _)| i as u64), evaluated, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelModel, EnergyQuanta, HarvestDistribution, LinkConfig};

    fn small() -> LinkParameters {
        LinkConfig {
            channel: ChannelModel::Rayleigh { rate: 0.5, tx_power: 1.0, mean_gain: 1.0 },
            max_attempts: 2,
            battery_capacity: EnergyQuanta(3),
            cost_sample: EnergyQuanta(1),
            cost_decode: EnergyQuanta(1),
            cost_feedback: EnergyQuanta(1),
            harvest: HarvestDistribution::bernoulli(EnergyQuanta(2), 0.5).unwrap(),
        }
        .build()
        .unwrap()
    }

    #[test]
    fn counts() {
        let p = small();
        assert_eq!(policy_count(&p, Protocol::NoFeedback), 16);
        assert_eq!(policy_count(&p, Protocol::NonAdaptiveFeedback), 4);
        assert_eq!(policy_count(&p, Protocol::AdaptiveFeedback), 288);
        assert!(matches!(
            enumerate_deterministic(&LinkConfig::reference().build().unwrap(), Protocol::AdaptiveFeedback),
            Err(OptError::TooManyPolicies { .. })
        ));
    }

    #[test]
    fn decoding_is_lexicographic() {
        let sets = vec![vec![Action::IDLE, Action::SAMPLE], vec![Action::IDLE], vec![Action::IDLE, Action::SAMPLE, Action::SAMPLE_ACK]];
        assert_eq!(decode(0, &sets), vec![Action::IDLE, Action::IDLE, Action::IDLE]);
        assert_eq!(decode(1, &sets), vec![Action::IDLE, Action::IDLE, Action::SAMPLE]);
        assert_eq!(decode(3, &sets), vec![Action::SAMPLE, Action::IDLE, Action::IDLE]);
        assert_eq!(decode(5, &sets), vec![Action::SAMPLE, Action::IDLE, Action::SAMPLE_ACK]);
    }

    #[test]
    fn single_choice_instance() {
        // Acknowledging costs more than the battery holds: only idling is feasible.
        let p = LinkConfig { cost_feedback: EnergyQuanta(2), ..small().config().clone() }.build().unwrap();
        assert_eq!(policy_count(&p, Protocol::NonAdaptiveFeedback), 1);
        let r = brute_force_best_policy(&p, Protocol::NonAdaptiveFeedback, BruteForceObjective::MaxThroughput)
            .unwrap();
        assert_eq!(r.evaluated, 1);
        assert_eq!(r.best_index, Some(0));
        assert_eq!(r.report.policy, Some(Policy::idle(p.state_space())));
        assert_eq!(r.report.throughput, 0.0);
    }

    #[test]
    fn no_feedback_optimum_is_myopic() {
        let p = small();
        let best = brute_force_best_policy(&p, Protocol::NoFeedback, BruteForceObjective::MaxThroughput).unwrap();
        let myopic = evaluate_policy(&super::super::myopic_policy(Protocol::NoFeedback, &p), &p, Protocol::NoFeedback)
            .unwrap();
        assert!((best.report.throughput - myopic.throughput).abs() < 1e-10);
        assert_eq!(best.evaluated, 16);
    }

    #[test]
    fn adaptive_dominates_no_feedback() {
        let p = small();
        let wo = brute_force_best_policy(&p, Protocol::NoFeedback, BruteForceObjective::MaxThroughput).unwrap();
        let a = brute_force_best_policy(&p, Protocol::AdaptiveFeedback, BruteForceObjective::MaxThroughput).unwrap();
        assert!(a.report.throughput >= wo.report.throughput - 1e-12);
    }

    #[test]
    fn unmeetable_floor() {
        let p = small();
        let r = brute_force_best_policy(&p, Protocol::AdaptiveFeedback, BruteForceObjective::MinPdpSubjectTo(0.99))
            .unwrap();
        assert_eq!(r.report.status, SolveStatus::Infeasible);
        assert!(r.best_index.is_none());
    }
}
