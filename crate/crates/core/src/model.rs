//! State and action spaces of the energy harvesting receiver, the per-protocol
//! feasible action sets, the one-slot transition kernel and the per-slot
//! expected indicators used by the long-run averages.
//!
//! All energies are integer multiples of a basic quantum and are stored as
//! [`EnergyQuanta`]. The channel only enters through the decoding success
//! probability `p_c`.

use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the harvest distribution summing to one.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("at most one transmission attempt ({0}); need K > 1")]
    TooFewAttempts(usize),
    #[error("battery capacity must hold at least one quantum")]
    ZeroCapacity,
    #[error("sampling plus decoding ({needed} quanta) exceeds battery capacity {capacity}")]
    DecodeUnaffordable { needed: u32, capacity: u32 },
    #[error("invalid harvest distribution: {0}")]
    InvalidHarvest(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("spending {spent} quanta from a battery holding {stored}")]
    EnergyOverdraw { spent: u32, stored: u32 },
    #[error("action {action} is infeasible in state {state}")]
    InfeasibleAction { state: SystemState, action: Action },
    #[error("state {0} lies outside the state space")]
    StateOutOfRange(SystemState),
}

/// A non-negative number of basic energy quanta.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct EnergyQuanta(pub u32);

impl EnergyQuanta {
    pub const ZERO: EnergyQuanta = EnergyQuanta(0);

    pub fn get(self) -> u32 {
        self.0
    }
}

impl Add for EnergyQuanta {
    type Output = EnergyQuanta;

    fn add(self, rhs: EnergyQuanta) -> EnergyQuanta {
        EnergyQuanta(self.0 + rhs.0)
    }
}

impl fmt::Display for EnergyQuanta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}E", self.0)
    }
}

/// `min(b - u + e, capacity)`.
///
/// Spending more than is stored is a logic error upstream (feasibility checks
/// must rule it out) and is reported as [`ModelError::EnergyOverdraw`].
pub fn battery_update(
    stored: EnergyQuanta,
    spent: EnergyQuanta,
    harvested: EnergyQuanta,
    capacity: EnergyQuanta,
) -> Result<EnergyQuanta, ModelError> {
    let left = stored
        .0
        .checked_sub(spent.0)
        .ok_or(ModelError::EnergyOverdraw { spent: spent.0, stored: stored.0 })?;
    Ok(EnergyQuanta(left.saturating_add(harvested.0).min(capacity.0)))
}

/// Decoding success probability `tail((2^R - 1) / p_tx)`, where `tail` is the
/// complementary CDF of the channel power gain.
pub fn success_probability(rate: f64, tx_power: f64, tail: impl Fn(f64) -> f64) -> f64 {
    let threshold = (rate * std::f64::consts::LN_2).exp_m1() / tx_power;
    tail(threshold).clamp(0.0, 1.0)
}

/// Complementary CDF of an exponential power gain (Rayleigh fading amplitude).
pub fn rayleigh_tail(mean_gain: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| if x <= 0.0 { 1.0 } else { (-x / mean_gain).exp() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChannelModel {
    /// Block Rayleigh fading with the given mean power gain.
    Rayleigh { rate: f64, tx_power: f64, mean_gain: f64 },
    /// Bypass the fading model and use this success probability directly.
    Fixed { success_prob: f64 },
}

impl ChannelModel {
    pub fn success_probability(&self) -> Result<f64, ModelError> {
        match *self {
            ChannelModel::Rayleigh { rate, tx_power, mean_gain } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(ModelError::InvalidChannel(format!("rate {rate} must be positive")));
                }
                if !(tx_power > 0.0 && tx_power.is_finite()) {
                    return Err(ModelError::InvalidChannel(format!(
                        "transmit power {tx_power} must be positive"
                    )));
                }
                if !(mean_gain > 0.0 && mean_gain.is_finite()) {
                    return Err(ModelError::InvalidChannel(format!(
                        "mean gain {mean_gain} must be positive"
                    )));
                }
                Ok(success_probability(rate, tx_power, rayleigh_tail(mean_gain)))
            }
            ChannelModel::Fixed { success_prob } => {
                if (0.0..=1.0).contains(&success_prob) {
                    Ok(success_prob)
                } else {
                    Err(ModelError::InvalidChannel(format!(
                        "success probability {success_prob} outside [0, 1]"
                    )))
                }
            }
        }
    }
}

/// I.i.d. per-slot energy arrivals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestDistribution {
    outcomes: Vec<(EnergyQuanta, f64)>,
}

impl HarvestDistribution {
    pub fn new(outcomes: Vec<(EnergyQuanta, f64)>) -> Result<Self, ModelError> {
        if outcomes.is_empty() {
            return Err(ModelError::InvalidHarvest("no outcomes".into()));
        }
        if let Some(&(e, p)) = outcomes.iter().find(|(_, p)| !(p.is_finite() && *p >= 0.0)) {
            return Err(ModelError::InvalidHarvest(format!("probability {p} for {e}")));
        }
        let total: f64 = outcomes.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(ModelError::InvalidHarvest(format!("probabilities sum to {total}")));
        }
        Ok(HarvestDistribution { outcomes })
    }

    /// `amount` with probability `rho`, nothing otherwise.
    pub fn bernoulli(amount: EnergyQuanta, rho: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(ModelError::InvalidHarvest(format!("rho {rho} outside [0, 1]")));
        }
        Self::new(vec![(EnergyQuanta::ZERO, 1.0 - rho), (amount, rho)])
    }

    pub fn outcomes(&self) -> &[(EnergyQuanta, f64)] {
        &self.outcomes
    }

    pub fn mean(&self) -> f64 {
        self.outcomes.iter().map(|(e, p)| e.0 as f64 * p).sum()
    }
}

/// Unvalidated link description. [`LinkConfig::build`] checks it and derives
/// the success probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub channel: ChannelModel,
    pub max_attempts: usize,
    pub battery_capacity: EnergyQuanta,
    pub cost_sample: EnergyQuanta,
    pub cost_decode: EnergyQuanta,
    pub cost_feedback: EnergyQuanta,
    pub harvest: HarvestDistribution,
}

impl LinkConfig {
    /// The reference operating point: R = 0.5, unit power, unit-mean Rayleigh
    /// fading, 15-quantum battery, 3-quantum sampling and decoding, 1-quantum
    /// feedback, K = 4 and Bernoulli(0.6) arrivals of 6 quanta.
    pub fn reference() -> Self {
        LinkConfig {
            channel: ChannelModel::Rayleigh { rate: 0.5, tx_power: 1.0, mean_gain: 1.0 },
            max_attempts: 4,
            battery_capacity: EnergyQuanta(15),
            cost_sample: EnergyQuanta(3),
            cost_decode: EnergyQuanta(3),
            cost_feedback: EnergyQuanta(1),
            harvest: HarvestDistribution::bernoulli(EnergyQuanta(6), 0.6)
                .expect("reference harvest distribution"),
        }
    }

    pub fn build(&self) -> Result<LinkParameters, ModelError> {
        if self.max_attempts < 2 {
            return Err(ModelError::TooFewAttempts(self.max_attempts));
        }
        if self.battery_capacity.0 == 0 {
            return Err(ModelError::ZeroCapacity);
        }
        let needed = self.cost_sample + self.cost_decode;
        if needed > self.battery_capacity {
            return Err(ModelError::DecodeUnaffordable {
                needed: needed.0,
                capacity: self.battery_capacity.0,
            });
        }
        // Re-run validation in case the distribution was deserialized.
        let harvest = HarvestDistribution::new(self.harvest.outcomes.clone())?;
        let success_prob = self.channel.success_probability()?;
        Ok(LinkParameters { config: LinkConfig { harvest, ..self.clone() }, success_prob })
    }
}

/// Validated link constants.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkParameters {
    config: LinkConfig,
    success_prob: f64,
}

impl LinkParameters {
    pub fn config(&self) -> &LinkConfig {
        &self.config
    }

    pub fn max_attempts(&self) -> usize {
        self.config.max_attempts
    }

    pub fn battery_capacity(&self) -> EnergyQuanta {
        self.config.battery_capacity
    }

    pub fn cost_sample(&self) -> EnergyQuanta {
        self.config.cost_sample
    }

    pub fn cost_decode(&self) -> EnergyQuanta {
        self.config.cost_decode
    }

    pub fn cost_feedback(&self) -> EnergyQuanta {
        self.config.cost_feedback
    }

    /// Energy needed to sample and decode in the same slot.
    pub fn decode_budget(&self) -> EnergyQuanta {
        self.config.cost_sample + self.config.cost_decode
    }

    /// Energy needed to sample, decode and acknowledge in the same slot.
    pub fn decode_ack_budget(&self) -> EnergyQuanta {
        self.decode_budget() + self.config.cost_feedback
    }

    pub fn harvest(&self) -> &HarvestDistribution {
        &self.config.harvest
    }

    pub fn success_prob(&self) -> f64 {
        self.success_prob
    }

    pub fn state_space(&self) -> StateSpace {
        StateSpace { capacity: self.config.battery_capacity.0, attempts: self.config.max_attempts }
    }

    /// States the system can occupy in the first slot: `b_1` is the first
    /// energy arrival, and the first packet is undecoded at attempt zero.
    pub fn initial_states(&self) -> Vec<SystemState> {
        let mut states: Vec<_> = self
            .harvest()
            .outcomes()
            .iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(e, _)| SystemState {
                battery: EnergyQuanta(e.0.min(self.battery_capacity().0)),
                tx_index: 0,
                decoded: false,
            })
            .collect();
        states.sort();
        states.dedup();
        states
    }
}

/// `(battery, transmission index, reception state)` at the start of a slot.
///
/// The derived ordering (battery, then index, then reception state) is the
/// canonical enumeration order used by [`StateSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SystemState {
    pub battery: EnergyQuanta,
    pub tx_index: usize,
    /// Whether the packet in flight has already been decoded.
    pub decoded: bool,
}

impl SystemState {
    pub fn new(battery: u32, tx_index: usize, decoded: bool) -> Self {
        SystemState { battery: EnergyQuanta(battery), tx_index, decoded }
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{},{}>", self.battery, self.tx_index, u8::from(self.decoded))
    }
}

/// Dense indexing of all `(M + 1) * K * 2` states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    capacity: u32,
    attempts: usize,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        (self.capacity as usize + 1) * self.attempts * 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, s: &SystemState) -> bool {
        s.battery.0 <= self.capacity && s.tx_index < self.attempts
    }

    pub fn index(&self, s: &SystemState) -> usize {
        debug_assert!(self.contains(s), "{s} outside state space");
        (s.battery.0 as usize * self.attempts + s.tx_index) * 2 + usize::from(s.decoded)
    }

    pub fn state(&self, index: usize) -> SystemState {
        debug_assert!(index < self.len());
        let decoded = index % 2 == 1;
        let rest = index / 2;
        SystemState {
            battery: EnergyQuanta((rest / self.attempts) as u32),
            tx_index: rest % self.attempts,
            decoded,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = SystemState> + '_ {
        (0..self.len()).map(move |i| self.state(i))
    }
}

/// All states in canonical order, starting at `<0,0,0>`.
pub fn enumerate_states(params: &LinkParameters) -> Vec<SystemState> {
    params.state_space().iter().collect()
}

/// `<sample, feedback>` decision for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Action {
    pub sample: bool,
    pub feedback: bool,
}

impl Action {
    pub const IDLE: Action = Action { sample: false, feedback: false };
    pub const SAMPLE: Action = Action { sample: true, feedback: false };
    pub const SAMPLE_ACK: Action = Action { sample: true, feedback: true };
    /// Delayed acknowledgement of a packet decoded in an earlier slot.
    pub const ACK: Action = Action { sample: false, feedback: true };

    /// Two-character code, e.g. `"10"` for sample without feedback.
    pub fn code(self) -> &'static str {
        match (self.sample, self.feedback) {
            (false, false) => "00",
            (true, false) => "10",
            (true, true) => "11",
            (false, true) => "01",
        }
    }

    pub fn from_code(code: &str) -> Option<Action> {
        match code {
            "00" => Some(Action::IDLE),
            "10" => Some(Action::SAMPLE),
            "11" => Some(Action::SAMPLE_ACK),
            "01" => Some(Action::ACK),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{}>", u8::from(self.sample), u8::from(self.feedback))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    NoFeedback,
    NonAdaptiveFeedback,
    AdaptiveFeedback,
}

impl Protocol {
    pub const ALL: [Protocol; 3] =
        [Protocol::NoFeedback, Protocol::NonAdaptiveFeedback, Protocol::AdaptiveFeedback];

    pub fn short_name(self) -> &'static str {
        match self {
            Protocol::NoFeedback => "wo",
            Protocol::NonAdaptiveFeedback => "na",
            Protocol::AdaptiveFeedback => "adaptive",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wo" | "none" | "no-feedback" => Ok(Protocol::NoFeedback),
            "na" | "non-adaptive" => Ok(Protocol::NonAdaptiveFeedback),
            "a" | "adaptive" => Ok(Protocol::AdaptiveFeedback),
            other => Err(format!("unknown protocol `{other}` (expected wo, na or adaptive)")),
        }
    }
}

/// Feasible actions in `s`, idle first.
///
/// Sampling is only offered when the receiver can also afford to decode,
/// and only while the packet in flight is still undecoded. The non-adaptive
/// protocol must acknowledge every success, so it only samples when the
/// feedback energy is also available.
pub fn feasible_actions(s: &SystemState, protocol: Protocol, params: &LinkParameters) -> Vec<Action> {
    let b = s.battery;
    let can_decode = !s.decoded && b >= params.decode_budget();
    let can_decode_ack = !s.decoded && b >= params.decode_ack_budget();
    let mut actions = vec![Action::IDLE];
    match protocol {
        Protocol::NoFeedback => {
            if can_decode {
                actions.push(Action::SAMPLE);
            }
        }
        Protocol::NonAdaptiveFeedback => {
            if can_decode_ack {
                actions.push(Action::SAMPLE_ACK);
            }
        }
        Protocol::AdaptiveFeedback => {
            if can_decode {
                actions.push(Action::SAMPLE);
            }
            if can_decode_ack {
                actions.push(Action::SAMPLE_ACK);
            }
            // `<b,0,1>` is unreachable and keeps only the idle action.
            if s.decoded && s.tx_index > 0 && b >= params.cost_feedback() {
                actions.push(Action::ACK);
            }
        }
    }
    actions
}

/// Expected packet-drop indicator.
pub fn reward_d(s: &SystemState, a: Action, params: &LinkParameters) -> f64 {
    if s.decoded || s.tx_index + 1 != params.max_attempts() {
        0.0
    } else if a.sample {
        1.0 - params.success_prob()
    } else {
        1.0
    }
}

/// New-packet indicator.
pub fn reward_n(s: &SystemState, _a: Action) -> f64 {
    if s.tx_index == 0 {
        1.0
    } else {
        0.0
    }
}

/// Expected decoding-success indicator.
pub fn reward_s(s: &SystemState, a: Action, params: &LinkParameters) -> f64 {
    if !s.decoded && a.sample {
        params.success_prob()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionEntry {
    pub next_state: SystemState,
    pub probability: f64,
}

/// Whether `a` is physically possible in `s`, independent of protocol.
fn action_allowed(s: &SystemState, a: Action, params: &LinkParameters) -> bool {
    match (a.sample, a.feedback) {
        (false, false) => true,
        (true, false) => !s.decoded && s.battery >= params.decode_budget(),
        (true, true) => !s.decoded && s.battery >= params.decode_ack_budget(),
        (false, true) => s.decoded && s.tx_index > 0 && s.battery >= params.cost_feedback(),
    }
}

/// Next-state distribution after taking `a` in `s`.
///
/// Entries are merged by next state, zero-probability entries dropped, and
/// the result sorted in canonical state order.
pub fn transition_distribution(
    s: &SystemState,
    a: Action,
    params: &LinkParameters,
) -> Result<Vec<TransitionEntry>, ModelError> {
    let space = params.state_space();
    if !space.contains(s) {
        return Err(ModelError::StateOutOfRange(*s));
    }
    if !action_allowed(s, a, params) {
        return Err(ModelError::InfeasibleAction { state: *s, action: a });
    }
    let last = params.max_attempts() - 1;
    let pc = params.success_prob();
    let k = s.tx_index;
    let advance = if k < last { k + 1 } else { 0 };

    // (energy spent, next index, next reception state, probability)
    let mut branches: Vec<(EnergyQuanta, usize, bool, f64)> = Vec::with_capacity(2);
    match (a.sample, a.feedback) {
        (false, false) => {
            let decoded = k < last && s.decoded;
            branches.push((EnergyQuanta::ZERO, advance, decoded, 1.0));
        }
        (true, false) => {
            branches.push((params.decode_budget(), advance, k < last, pc));
            branches.push((params.cost_sample(), advance, false, 1.0 - pc));
        }
        (true, true) => {
            branches.push((params.decode_ack_budget(), 0, false, pc));
            branches.push((params.cost_sample(), advance, false, 1.0 - pc));
        }
        (false, true) => {
            branches.push((params.cost_feedback(), 0, false, 1.0));
        }
    }

    let mut entries: Vec<TransitionEntry> = Vec::with_capacity(branches.len() * 2);
    for &(spent, tx_index, decoded, p_branch) in &branches {
        for &(e, p_e) in params.harvest().outcomes() {
            let probability = p_branch * p_e;
            if probability == 0.0 {
                continue;
            }
            let battery = battery_update(s.battery, spent, e, params.battery_capacity())?;
            entries.push(TransitionEntry {
                next_state: SystemState { battery, tx_index, decoded },
                probability,
            });
        }
    }
    entries.sort_by_key(|x| x.next_state);
    let mut merged: Vec<TransitionEntry> = Vec::with_capacity(entries.len());
    for entry in entries {
        match merged.last_mut() {
            Some(prev) if prev.next_state == entry.next_state => prev.probability += entry.probability,
            _ => merged.push(entry),
        }
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PC: f64 = 0.660_859_801_406_827_9;

    fn reference() -> LinkParameters {
        LinkConfig::reference().build().unwrap()
    }

    fn bernoulli_params(rho: f64) -> LinkParameters {
        LinkConfig { harvest: HarvestDistribution::bernoulli(EnergyQuanta(6), rho).unwrap(), ..LinkConfig::reference() }
            .build()
            .unwrap()
    }

    #[test]
    fn success_probability_rayleigh() {
        let pc = success_probability(0.5, 1.0, rayleigh_tail(1.0));
        assert!((pc - PC).abs() < 1e-15, "{pc}");
        assert!((reference().success_prob() - PC).abs() < 1e-15);
    }

    #[test]
    fn success_probability_limits() {
        assert!((success_probability(1e-12, 3.0, rayleigh_tail(1.0)) - 1.0).abs() < 1e-12);
        let outage = |x: f64| if x > 0.0 { 0.0 } else { 1.0 };
        assert_eq!(success_probability(0.5, 1.0, outage), 0.0);
    }

    #[test]
    fn battery_examples() {
        let cap = EnergyQuanta(15);
        let q = EnergyQuanta;
        assert_eq!(battery_update(q(6), q(6), q(6), cap), Ok(q(6)));
        assert_eq!(battery_update(q(15), q(0), q(6), cap), Ok(q(15)));
        assert_eq!(battery_update(q(3), q(3), q(0), cap), Ok(q(0)));
        assert!(matches!(
            battery_update(q(2), q(3), q(6), cap),
            Err(ModelError::EnergyOverdraw { spent: 3, stored: 2 })
        ));
    }

    #[test]
    fn construction_rejects_bad_links() {
        let mut cfg = LinkConfig::reference();
        cfg.max_attempts = 1;
        assert_eq!(cfg.build(), Err(ModelError::TooFewAttempts(1)));

        let mut cfg = LinkConfig::reference();
        cfg.cost_decode = EnergyQuanta(13);
        assert!(matches!(cfg.build(), Err(ModelError::DecodeUnaffordable { needed: 16, capacity: 15 })));

        assert!(HarvestDistribution::new(vec![(EnergyQuanta(1), 0.5), (EnergyQuanta(2), 0.4)]).is_err());
        assert!(HarvestDistribution::new(vec![(EnergyQuanta(1), 1.5), (EnergyQuanta(2), -0.5)]).is_err());
        assert!(HarvestDistribution::bernoulli(EnergyQuanta(1), 1.2).is_err());

        let mut cfg = LinkConfig::reference();
        cfg.channel = ChannelModel::Fixed { success_prob: 1.1 };
        assert!(matches!(cfg.build(), Err(ModelError::InvalidChannel(_))));
    }

    #[test]
    fn feasible_sets_reference_costs() {
        let p = reference();
        let adaptive = |b, k, i| feasible_actions(&SystemState::new(b, k, i), Protocol::AdaptiveFeedback, &p);
        assert_eq!(adaptive(6, 0, false), vec![Action::IDLE, Action::SAMPLE]);
        assert_eq!(adaptive(7, 1, false), vec![Action::IDLE, Action::SAMPLE, Action::SAMPLE_ACK]);
        assert_eq!(adaptive(0, 2, true), vec![Action::IDLE]);
        assert_eq!(adaptive(1, 2, true), vec![Action::IDLE, Action::ACK]);
        assert_eq!(adaptive(15, 0, true), vec![Action::IDLE]);

        let na = |b, k, i| feasible_actions(&SystemState::new(b, k, i), Protocol::NonAdaptiveFeedback, &p);
        assert_eq!(na(6, 0, false), vec![Action::IDLE]);
        assert_eq!(na(7, 0, false), vec![Action::IDLE, Action::SAMPLE_ACK]);
        assert_eq!(na(9, 2, true), vec![Action::IDLE]);

        let wo = |b, k, i| feasible_actions(&SystemState::new(b, k, i), Protocol::NoFeedback, &p);
        assert_eq!(wo(6, 3, false), vec![Action::IDLE, Action::SAMPLE]);
        assert_eq!(wo(5, 3, false), vec![Action::IDLE]);
        assert_eq!(wo(15, 1, true), vec![Action::IDLE]);
    }

    #[test]
    fn rewards() {
        let p = reference();
        let s = |b, k, i| SystemState::new(b, k, i);
        assert_eq!(reward_d(&s(6, 3, false), Action::IDLE, &p), 1.0);
        assert!((reward_d(&s(6, 3, false), Action::SAMPLE, &p) - (1.0 - PC)).abs() < 1e-15);
        for a in [Action::IDLE, Action::SAMPLE, Action::SAMPLE_ACK] {
            assert_eq!(reward_d(&s(9, 1, false), a, &p), 0.0);
        }
        assert_eq!(reward_d(&s(9, 3, true), Action::IDLE, &p), 0.0);

        assert_eq!(reward_n(&s(4, 0, false), Action::SAMPLE), 1.0);
        assert_eq!(reward_n(&s(4, 2, true), Action::IDLE), 0.0);
        let cycle: f64 = (0..4).map(|k| reward_n(&s(0, k, false), Action::IDLE)).sum();
        assert_eq!(cycle, 1.0);

        assert!((reward_s(&s(6, 0, false), Action::SAMPLE, &p) - PC).abs() < 1e-15);
        assert_eq!(reward_s(&s(6, 0, false), Action::IDLE, &p), 0.0);
        assert_eq!(reward_s(&s(6, 2, true), Action::ACK, &p), 0.0);
    }

    #[test]
    fn transition_examples() {
        let rho = 0.35;
        let p = bernoulli_params(rho);
        let pc = p.success_prob();
        let got = transition_distribution(&SystemState::new(6, 0, false), Action::SAMPLE, &p).unwrap();
        let want = [
            (SystemState::new(0, 1, true), pc * (1.0 - rho)),
            (SystemState::new(3, 1, false), (1.0 - pc) * (1.0 - rho)),
            (SystemState::new(6, 1, true), pc * rho),
            (SystemState::new(9, 1, false), (1.0 - pc) * rho),
        ];
        assert_eq!(got.len(), want.len());
        for (entry, (state, prob)) in got.iter().zip(want) {
            assert_eq!(entry.next_state, state);
            assert!((entry.probability - prob).abs() < 1e-15);
        }

        let got = transition_distribution(&SystemState::new(15, 1, false), Action::IDLE, &p).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].next_state, SystemState::new(15, 2, false));
        assert!((got[0].probability - 1.0).abs() < 1e-15);

        let got = transition_distribution(&SystemState::new(2, 3, true), Action::IDLE, &p).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].next_state, SystemState::new(2, 0, false));
        assert!((got[0].probability - (1.0 - rho)).abs() < 1e-15);
        assert_eq!(got[1].next_state, SystemState::new(8, 0, false));
        assert!((got[1].probability - rho).abs() < 1e-15);
    }

    #[test]
    fn transition_ack_cases() {
        let p = bernoulli_params(0.5);
        let pc = p.success_prob();
        let got = transition_distribution(&SystemState::new(7, 3, false), Action::SAMPLE_ACK, &p).unwrap();
        // success: spend 7, restart; failure at the last attempt also restarts
        let total: f64 = got.iter().map(|e| e.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(got.iter().all(|e| e.next_state.tx_index == 0 && !e.next_state.decoded));
        let restart_empty = got.iter().find(|e| e.next_state.battery.0 == 0).unwrap();
        assert!((restart_empty.probability - pc * 0.5).abs() < 1e-15);

        let got = transition_distribution(&SystemState::new(1, 2, true), Action::ACK, &p).unwrap();
        assert_eq!(
            got.iter().map(|e| e.next_state).collect::<Vec<_>>(),
            vec![SystemState::new(0, 0, false), SystemState::new(6, 0, false)]
        );
    }

    #[test]
    fn infeasible_transitions_are_rejected() {
        let p = reference();
        for (s, a) in [
            (SystemState::new(5, 0, false), Action::SAMPLE),
            (SystemState::new(6, 0, false), Action::SAMPLE_ACK),
            (SystemState::new(9, 1, true), Action::SAMPLE),
            (SystemState::new(9, 0, true), Action::ACK),
            (SystemState::new(0, 2, true), Action::ACK),
        ] {
            assert!(matches!(
                transition_distribution(&s, a, &p),
                Err(ModelError::InfeasibleAction { .. })
            ));
        }
        assert!(matches!(
            transition_distribution(&SystemState::new(16, 0, false), Action::IDLE, &p),
            Err(ModelError::StateOutOfRange(_))
        ));
    }

    #[test]
    fn enumeration() {
        let p = reference();
        let states = enumerate_states(&p);
        assert_eq!(states.len(), 128);
        assert_eq!(states[0], SystemState::new(0, 0, false));
        assert!(states.windows(2).all(|w| w[0] < w[1]));
        let space = p.state_space();
        for (i, s) in states.iter().enumerate() {
            assert_eq!(space.index(s), i);
        }

        let mut cfg = LinkConfig::reference();
        cfg.battery_capacity = EnergyQuanta(2);
        cfg.cost_sample = EnergyQuanta(1);
        cfg.cost_decode = EnergyQuanta(1);
        cfg.max_attempts = 2;
        assert_eq!(enumerate_states(&cfg.build().unwrap()).len(), 12);
    }

    #[test]
    fn protocol_names_round_trip() {
        for proto in Protocol::ALL {
            assert_eq!(proto.short_name().parse::<Protocol>(), Ok(proto));
        }
        assert!("bogus".parse::<Protocol>().is_err());
    }
}
