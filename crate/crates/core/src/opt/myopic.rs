use crate::chain::evaluate_policy;
use crate::model::{Action, LinkParameters, Protocol};
use crate::policy::Policy;

use super::{OptError, SolveReport, SolveStatus};

/// Greedy policy: act whenever the battery allows it.
///
/// Without feedback, sample whenever the packet is undecoded and sampling
/// plus decoding is affordable. With non-adaptive feedback, sample only when
/// the acknowledgement is affordable too. With adaptive feedback, sample with
/// an acknowledgement when affordable, without one otherwise, and send a
/// delayed acknowledgement as soon as the feedback energy is there.
pub fn myopic_policy(protocol: Protocol, params: &LinkParameters) -> Policy {
    let decode = params.decode_budget();
    let decode_ack = params.decode_ack_budget();
    let feedback = params.cost_feedback();
    Policy::deterministic(params.state_space(), |s| {
        let b = s.battery;
        match protocol {
            Protocol::NoFeedback if !s.decoded && b >= decode => Action::SAMPLE,
            Protocol::NonAdaptiveFeedback if !s.decoded && b >= decode_ack => Action::SAMPLE_ACK,
            Protocol::AdaptiveFeedback if !s.decoded && b >= decode_ack => Action::SAMPLE_ACK,
            Protocol::AdaptiveFeedback if !s.decoded && b >= decode => Action::SAMPLE,
            // A delayed ACK needs a packet decoded in an earlier attempt.
            Protocol::AdaptiveFeedback if s.decoded && s.tx_index > 0 && b >= feedback => Action::ACK,
            _ => Action::IDLE,
        }
    })
}

/// Throughput-constrained drop minimization without feedback.
///
/// The myopic policy maximizes throughput, and since a new packet starts every
/// K slots regardless, it also minimizes the drop probability. The problem is
/// feasible iff its throughput reaches `min_throughput`.
pub fn solve_no_feedback(params: &LinkParameters, min_throughput: f64) -> Result<SolveReport, OptError> {
    if !(min_throughput >= 0.0) {
        return Err(OptError::InvalidArgument(format!("throughput floor {min_throughput}")));
    }
    let protocol = Protocol::NoFeedback;
    let policy = myopic_policy(protocol, params);
    let point = evaluate_policy(&policy, params, protocol)?;
    if point.throughput < min_throughput {
        return Ok(SolveReport::infeasible(protocol, point.throughput));
    }
    Ok(SolveReport {
        protocol,
        status: SolveStatus::Optimal,
        policy: Some(policy),
        pdp: point.pdp,
        throughput: point.throughput,
        new_packet_rate: point.new_packet_rate,
        q_trace: Vec::new(),
        iterations: 0,
        converged: true,
        occupation: None,
    })
}

/// Renewal-theory values for a receiver with free sampling, decoding and
/// feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForms {
    /// Drop probability without feedback.
    pub pdp_no_feedback: f64,
    /// Drop probability with non-adaptive feedback (equal to the above).
    pub pdp_non_adaptive: f64,
    pub throughput_non_adaptive: f64,
    pub throughput_no_feedback: f64,
}

pub fn closed_forms_unconstrained(max_attempts: usize, success_prob: f64) -> ClosedForms {
    let all_fail = (1.0 - success_prob).powi(max_attempts as i32);
    ClosedForms {
        pdp_no_feedback: all_fail,
        pdp_non_adaptive: all_fail,
        throughput_non_adaptive: success_prob,
        throughput_no_feedback: (1.0 - all_fail) / max_attempts as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EnergyQuanta, HarvestDistribution, LinkConfig, SystemState};

    const PDP_FREE: f64 = 0.013_228_697_347_800_903;
    const TP_FREE: f64 = 0.246_692_825_663_049_77;

    fn free_energy() -> LinkParameters {
        LinkConfig {
            cost_sample: EnergyQuanta(0),
            cost_decode: EnergyQuanta(0),
            cost_feedback: EnergyQuanta(0),
            ..LinkConfig::reference()
        }
        .build()
        .unwrap()
    }

    #[test]
    fn myopic_examples() {
        let p = LinkConfig::reference().build().unwrap();
        let space = p.state_space();
        let at = |proto, b, k, i| myopic_policy(proto, &p).rule(space.index(&SystemState::new(b, k, i)))[0].0;
        assert_eq!(at(Protocol::NoFeedback, 6, 1, false), Action::SAMPLE);
        assert_eq!(at(Protocol::AdaptiveFeedback, 6, 1, false), Action::SAMPLE);
        assert_eq!(at(Protocol::AdaptiveFeedback, 7, 1, false), Action::SAMPLE_ACK);
        assert_eq!(at(Protocol::AdaptiveFeedback, 0, 2, true), Action::IDLE);
        assert_eq!(at(Protocol::AdaptiveFeedback, 1, 2, true), Action::ACK);
        assert_eq!(at(Protocol::NonAdaptiveFeedback, 6, 1, false), Action::IDLE);
        assert_eq!(at(Protocol::NonAdaptiveFeedback, 7, 1, false), Action::SAMPLE_ACK);
        for proto in Protocol::ALL {
            assert!(myopic_policy(proto, &p).validate(&p, proto).is_ok());
        }
    }

    #[test]
    fn closed_form_values() {
        let c = closed_forms_unconstrained(4, 0.660_859_801_406_827_9);
        assert!((c.pdp_no_feedback - PDP_FREE).abs() < 1e-15);
        assert_eq!(c.pdp_no_feedback, c.pdp_non_adaptive);
        assert!((c.throughput_non_adaptive - 0.660_859_801_406_827_9).abs() < 1e-15);
        assert!((c.throughput_no_feedback - TP_FREE).abs() < 1e-15);

        let c = closed_forms_unconstrained(4, 1.0);
        assert_eq!((c.pdp_no_feedback, c.throughput_non_adaptive, c.throughput_no_feedback), (0.0, 1.0, 0.25));
        let c = closed_forms_unconstrained(4, 0.0);
        assert_eq!((c.pdp_no_feedback, c.throughput_non_adaptive, c.throughput_no_feedback), (1.0, 0.0, 0.0));
    }

    #[test]
    fn no_feedback_feasibility() {
        let p = free_energy();
        let ok = solve_no_feedback(&p, 0.2).unwrap();
        assert_eq!(ok.status, SolveStatus::Optimal);
        assert!((ok.pdp - PDP_FREE).abs() < 1e-9);
        assert!((ok.new_packet_rate - 0.25).abs() < 1e-12);

        let too_much = solve_no_feedback(&p, 0.3).unwrap();
        assert_eq!(too_much.status, SolveStatus::Infeasible);
        assert_eq!(too_much.pdp, 1.0);
        assert!((too_much.throughput - TP_FREE).abs() < 1e-9);

        assert!(matches!(solve_no_feedback(&p, f64::NAN), Err(OptError::InvalidArgument(_))));
    }

    #[test]
    fn no_harvest_is_infeasible() {
        let p = LinkConfig {
            harvest: HarvestDistribution::bernoulli(EnergyQuanta(6), 0.0).unwrap(),
            ..LinkConfig::reference()
        }
        .build()
        .unwrap();
        for tth in [1e-6, 0.1] {
            assert_eq!(solve_no_feedback(&p, tth).unwrap().status, SolveStatus::Infeasible);
        }
    }
}
