//! Randomized stationary reception policies and their on-disk records.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{feasible_actions, Action, LinkParameters, Protocol, StateSpace, SystemState};

pub const POLICY_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("policy covers {got} states, the link has {expected}")]
    WrongSize { got: usize, expected: usize },
    #[error("action probabilities in {state} sum to {sum}")]
    NotNormalized { state: SystemState, sum: f64 },
    #[error("negative probability {prob} for {action} in {state}")]
    NegativeProbability { state: SystemState, action: Action, prob: f64 },
    #[error("policy uses {action} in {state}, which the {protocol} protocol does not allow")]
    Infeasible { state: SystemState, action: Action, protocol: Protocol },
    #[error("record for {0} is missing or duplicated")]
    BadRecords(SystemState),
    #[error("unknown action code `{0}`")]
    UnknownAction(String),
}

/// Per-state action distributions, indexed by canonical state index.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    rules: Vec<Vec<(Action, f64)>>,
}

impl Policy {
    pub fn from_rules(rules: Vec<Vec<(Action, f64)>>) -> Self {
        Policy { rules }
    }

    pub fn deterministic(space: StateSpace, mut choose: impl FnMut(&SystemState) -> Action) -> Self {
        Policy { rules: space.iter().map(|s| vec![(choose(&s), 1.0)]).collect() }
    }

    /// Idle in every state.
    pub fn idle(space: StateSpace) -> Self {
        Self::deterministic(space, |_| Action::IDLE)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Action distribution in the state with canonical index `state`.
    pub fn rule(&self, state: usize) -> &[(Action, f64)] {
        &self.rules[state]
    }

    pub fn prob(&self, state: usize, action: Action) -> f64 {
        self.rules[state].iter().filter(|(a, _)| *a == action).fold(0.0, |acc, (_, p)| acc + p)
    }

    pub fn is_deterministic(&self) -> bool {
        self.rules.iter().all(|r| r.iter().filter(|(_, p)| *p > 0.0).count() == 1)
    }

    /// Checks that every state has a normalized distribution supported on
    /// the protocol's feasible actions.
    pub fn validate(&self, params: &LinkParameters, protocol: Protocol) -> Result<(), PolicyError> {
        let space = params.state_space();
        if self.rules.len() != space.len() {
            return Err(PolicyError::WrongSize { got: self.rules.len(), expected: space.len() });
        }
        for (idx, rule) in self.rules.iter().enumerate() {
            let state = space.state(idx);
            let feasible = feasible_actions(&state, protocol, params);
            let mut sum = 0.0;
            for &(action, prob) in rule {
                if prob < 0.0 {
                    return Err(PolicyError::NegativeProbability { state, action, prob });
                }
                if prob > 0.0 && !feasible.contains(&action) {
                    return Err(PolicyError::Infeasible { state, action, protocol });
                }
                sum += prob;
            }
            if (sum - 1.0).abs() > POLICY_SUM_TOL {
                return Err(PolicyError::NotNormalized { state, sum });
            }
        }
        Ok(())
    }

    /// One record per state listing every feasible action with its probability.
    pub fn to_records(&self, params: &LinkParameters, protocol: Protocol) -> Vec<PolicyRecord> {
        let space = params.state_space();
        space
            .iter()
            .enumerate()
            .map(|(idx, state)| PolicyRecord {
                battery: state.battery.get(),
                tx_index: state.tx_index,
                rx_state: u8::from(state.decoded),
                actions: feasible_actions(&state, protocol, params)
                    .into_iter()
                    .map(|a| ActionProbability { action: a.code().to_string(), probability: self.prob(idx, a) })
                    .collect(),
            })
            .collect()
    }

    pub fn from_records(records: &[PolicyRecord], params: &LinkParameters) -> Result<Self, PolicyError> {
        let space = params.state_space();
        let mut rules: Vec<Option<Vec<(Action, f64)>>> = vec![None; space.len()];
        for rec in records {
            let state = SystemState::new(rec.battery, rec.tx_index, rec.rx_state != 0);
            if !space.contains(&state) || rec.rx_state > 1 {
                return Err(PolicyError::BadRecords(state));
            }
            let slot = &mut rules[space.index(&state)];
            if slot.is_some() {
                return Err(PolicyError::BadRecords(state));
            }
            let rule = rec
                .actions
                .iter()
                .map(|ap| {
                    Action::from_code(&ap.action)
                        .map(|a| (a, ap.probability))
                        .ok_or_else(|| PolicyError::UnknownAction(ap.action.clone()))
                })
                .filter(|r| !matches!(r, Ok((_, p)) if *p == 0.0))
                .collect::<Result<Vec<_>, _>>()?;
            *slot = Some(rule);
        }
        let rules = rules
            .into_iter()
            .enumerate()
            .map(|(idx, r)| r.ok_or_else(|| PolicyError::BadRecords(space.state(idx))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Policy { rules })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProbability {
    /// `"00"`, `"10"`, `"11"` or `"01"` for `<sample, feedback>`.
    pub action: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub battery: u32,
    pub tx_index: usize,
    pub rx_state: u8,
    pub actions: Vec<ActionProbability>,
}
