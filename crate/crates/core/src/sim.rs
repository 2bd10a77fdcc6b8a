//! Slotted Monte Carlo simulation of the link under a reception policy.
//!
//! Randomness comes from ChaCha8 seeded with `seed`; replication `r` of a
//! batch runs on stream `r` of that seed (`ChaCha8Rng::set_stream`), so every
//! replication is an independent, reproducible sub-stream. A single
//! [`simulate`] call uses stream 0.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{
    battery_update, feasible_actions, Action, EnergyQuanta, LinkParameters, ModelError, Protocol,
    SystemState,
};
use crate::policy::{Policy, PolicyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("horizon must be at least one slot")]
    EmptyHorizon,
    #[error("at least two replications are needed for a standard error, got {0}")]
    TooFewReplications(usize),
    #[error("policy chose infeasible action {action} in {state} at slot {slot}")]
    InfeasibleAction { slot: u64, state: SystemState, action: Action },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy)]
pub struct SimConfig<'a> {
    pub horizon: u64,
    pub seed: u64,
    pub params: &'a LinkParameters,
    pub protocol: Protocol,
    pub policy: &'a Policy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEstimate {
    pub horizon: u64,
    /// Packets dropped after their last attempt.
    pub drops: u64,
    /// Packets started, excluding one still in flight at the horizon.
    pub new_packets: u64,
    /// Slots in which a packet was decoded.
    pub successes: u64,
    pub pdp_hat: f64,
    pub throughput_hat: f64,
    /// Fraction of slots spent in each state, by canonical index.
    pub state_visit_freq: Vec<f64>,
}

impl SimEstimate {
    /// `new_packets - drops - successes`; always in `{-1, 0, 1}`.
    pub fn counting_gap(&self) -> i64 {
        self.new_packets as i64 - self.drops as i64 - self.successes as i64
    }
}

/// Cumulative weights for inverse-CDF draws.
struct Sampler<T> {
    items: Vec<(T, f64)>,
}

impl<T: Copy> Sampler<T> {
    fn new(weights: impl IntoIterator<Item = (T, f64)>) -> Self {
        let mut acc = 0.0;
        let items = weights
            .into_iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(t, w)| {
                acc += w;
                (t, acc)
            })
            .collect();
        Sampler { items }
    }

    fn draw(&self, rng: &mut impl Rng) -> T {
        if self.items.len() == 1 {
            return self.items[0].0;
        }
        let total = self.items.last().map_or(1.0, |x| x.1);
        let u = rng.gen::<f64>() * total;
        self.items.iter().find(|(_, c)| u < *c).unwrap_or(self.items.last().unwrap()).0
    }
}

fn run(cfg: &SimConfig<'_>, rng: &mut ChaCha8Rng) -> Result<SimEstimate, SimError> {
    if cfg.horizon == 0 {
        return Err(SimError::EmptyHorizon);
    }
    let params = cfg.params;
    cfg.policy.validate(params, cfg.protocol)?;
    let space = params.state_space();
    let last_attempt = params.max_attempts() - 1;
    let capacity = params.battery_capacity();
    let pc = params.success_prob();
    let harvest = Sampler::new(params.harvest().outcomes().iter().copied());
    let actions: Vec<Sampler<Action>> =
        (0..space.len()).map(|i| Sampler::new(cfg.policy.rule(i).iter().copied())).collect();
    let feasible: Vec<Vec<Action>> =
        space.iter().map(|s| feasible_actions(&s, cfg.protocol, params)).collect();

    let first = harvest.draw(rng);
    let mut state = SystemState {
        battery: EnergyQuanta(first.get().min(capacity.get())),
        tx_index: 0,
        decoded: false,
    };
    let mut visits = vec![0u64; space.len()];
    let (mut drops, mut new_packets, mut successes) = (0u64, 0u64, 0u64);

    for slot in 0..cfg.horizon {
        let idx = space.index(&state);
        visits[idx] += 1;
        if state.tx_index == 0 {
            new_packets += 1;
        }
        let action = actions[idx].draw(rng);
        if !feasible[idx].contains(&action) {
            return Err(SimError::InfeasibleAction { slot, state, action });
        }

        let decoded_now = action.sample && rng.gen::<f64>() < pc;
        let mut spent = EnergyQuanta::ZERO;
        if action.sample {
            spent = spent + params.cost_sample();
            if decoded_now {
                spent = spent + params.cost_decode();
            }
        }
        let ack_sent = (action.sample && action.feedback && decoded_now) || (!action.sample && action.feedback);
        if ack_sent {
            spent = spent + params.cost_feedback();
        }
        if decoded_now {
            successes += 1;
        }
        if !state.decoded && !decoded_now && state.tx_index == last_attempt {
            drops += 1;
        }

        let arrival = harvest.draw(rng);
        let battery = battery_update(state.battery, spent, arrival, capacity)?;
        state = if ack_sent || state.tx_index == last_attempt {
            SystemState { battery, tx_index: 0, decoded: false }
        } else {
            SystemState { battery, tx_index: state.tx_index + 1, decoded: state.decoded || decoded_now }
        };
    }
    // The packet still in flight is not counted.
    if state.tx_index != 0 {
        new_packets -= 1;
    }
    let horizon = cfg.horizon;
    Ok(SimEstimate {
        horizon,
        drops,
        new_packets,
        successes,
        pdp_hat: if new_packets > 0 { drops as f64 / new_packets as f64 } else { 0.0 },
        throughput_hat: successes as f64 / horizon as f64,
        state_visit_freq: visits.iter().map(|&v| v as f64 / horizon as f64).collect(),
    })
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One trajectory; deterministic given the configuration.
pub fn simulate(cfg: &SimConfig<'_>) -> Result<SimEstimate, SimError> {
    run(cfg, &mut stream_rng(cfg.seed, 0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatedEstimate {
    pub replications: Vec<SimEstimate>,
    pub pdp_mean: f64,
    pub pdp_se: f64,
    pub throughput_mean: f64,
    pub throughput_se: f64,
    /// Visit frequencies averaged over replications.
    pub state_visit_freq: Vec<f64>,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Independent replications (stream `r` for replication `r`) run in
/// parallel, with sample means and standard errors.
pub fn estimate_with_ci(cfg: &SimConfig<'_>, n_reps: usize) -> Result<ReplicatedEstimate, SimError> {
    if n_reps < 2 {
        return Err(SimError::TooFewReplications(n_reps));
    }
    let replications = (0..n_reps as u64)
        .into_par_iter()
        .map(|r| run(cfg, &mut stream_rng(cfg.seed, r)))
        .collect::<Result<Vec<_>, _>>()?;
    let pdps: Vec<f64> = replications.iter().map(|e| e.pdp_hat).collect();
    let tps: Vec<f64> = replications.iter().map(|e| e.throughput_hat).collect();
    let (pdp_mean, pdp_se) = mean_se(&pdps);
    let (throughput_mean, throughput_se) = mean_se(&tps);
    let n_states = replications[0].state_visit_freq.len();
    let state_visit_freq = (0..n_states)
        .map(|i| replications.iter().map(|e| e.state_visit_freq[i]).sum::<f64>() / n_reps as f64)
        .collect();
    Ok(ReplicatedEstimate { replications, pdp_mean, pdp_se, throughput_mean, throughput_se, state_visit_freq })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelModel, HarvestDistribution, LinkConfig};
    use crate::opt::myopic_policy;

    #[test]
    fn idle_policy_counts() {
        let p = LinkConfig::reference().build().unwrap();
        let policy = Policy::idle(p.state_space());
        let est = simulate(&SimConfig { horizon: 10_000, seed: 1, params: &p, protocol: Protocol::AdaptiveFeedback, policy: &policy })
            .unwrap();
        assert_eq!(est.successes, 0);
        assert_eq!(est.new_packets, 2500);
        assert_eq!(est.drops, 2500);
        assert_eq!(est.pdp_hat, 1.0);
    }

    #[test]
    fn in_flight_packet_is_excluded() {
        let p = LinkConfig::reference().build().unwrap();
        let policy = Policy::idle(p.state_space());
        let est = simulate(&SimConfig { horizon: 10_002, seed: 1, params: &p, protocol: Protocol::NoFeedback, policy: &policy })
            .unwrap();
        assert_eq!(est.new_packets, 2500);
        assert_eq!(est.drops, 2500);
    }

    #[test]
    fn same_seed_same_result() {
        let p = LinkConfig::reference().build().unwrap();
        let policy = myopic_policy(Protocol::AdaptiveFeedback, &p);
        let cfg = SimConfig { horizon: 50_000, seed: 99, params: &p, protocol: Protocol::AdaptiveFeedback, policy: &policy };
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(&SimConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a, c);
        assert!(a.counting_gap().abs() <= 1);
    }

    #[test]
    fn deterministic_outcomes_have_zero_error() {
        let p = LinkConfig {
            channel: ChannelModel::Fixed { success_prob: 1.0 },
            harvest: HarvestDistribution::new(vec![(EnergyQuanta(15), 1.0)]).unwrap(),
            ..LinkConfig::reference()
        }
        .build()
        .unwrap();
        let policy = myopic_policy(Protocol::NonAdaptiveFeedback, &p);
        let cfg = SimConfig { horizon: 1_000, seed: 5, params: &p, protocol: Protocol::NonAdaptiveFeedback, policy: &policy };
        let est = estimate_with_ci(&cfg, 10).unwrap();
        assert_eq!(est.pdp_se, 0.0);
        assert_eq!(est.throughput_se, 0.0);
        assert_eq!(est.pdp_mean, 0.0);
        assert_eq!(est.throughput_mean, 1.0);
    }

    #[test]
    fn rejects_bad_requests() {
        let p = LinkConfig::reference().build().unwrap();
        let policy = Policy::idle(p.state_space());
        let cfg = SimConfig { horizon: 10, seed: 0, params: &p, protocol: Protocol::NoFeedback, policy: &policy };
        assert_eq!(estimate_with_ci(&cfg, 1), Err(SimError::TooFewReplications(1)));
        assert_eq!(simulate(&SimConfig { horizon: 0, ..cfg }), Err(SimError::EmptyHorizon));
        let bad = Policy::deterministic(p.state_space(), |_| Action::SAMPLE);
        assert!(matches!(simulate(&SimConfig { policy: &bad, ..cfg }), Err(SimError::Policy(_))));
    }
}
