use crate::lp::LinearProgram;
use crate::model::{
    feasible_actions, reward_d, reward_n, reward_s, transition_distribution, Action, LinkParameters,
    ModelError, Protocol, StateSpace,
};
use crate::policy::Policy;

/// Per-column data of the occupation-measure LP. Columns are the feasible
/// `(state, action)` pairs in canonical state order, actions in
/// [`feasible_actions`] order.
#[derive(Debug, Clone)]
pub struct CmdpModel {
    space: StateSpace,
    columns: Vec<(usize, Action)>,
    drop: Vec<f64>,
    new_packet: Vec<f64>,
    success: Vec<f64>,
    transitions: Vec<Vec<(usize, f64)>>,
}

impl CmdpModel {
    pub fn new(params: &LinkParameters, protocol: Protocol) -> Result<Self, ModelError> {
        let space = params.state_space();
        let mut model = CmdpModel {
            space,
            columns: Vec::new(),
            drop: Vec::new(),
            new_packet: Vec::new(),
            success: Vec::new(),
            transitions: Vec::new(),
        };
        for (idx, s) in space.iter().enumerate() {
            for a in feasible_actions(&s, protocol, params) {
                model.columns.push((idx, a));
                model.drop.push(reward_d(&s, a, params));
                model.new_packet.push(reward_n(&s, a));
                model.success.push(reward_s(&s, a, params));
                model.transitions.push(
                    transition_distribution(&s, a, params)?
                        .into_iter()
                        .map(|e| (space.index(&e.next_state), e.probability))
                        .collect(),
                );
            }
        }
        Ok(model)
    }

    pub fn columns(&self) -> &[(usize, Action)] {
        &self.columns
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    /// LP for the weighted cost `d - q n`.
    ///
    /// Rows: one balance equality per state, the normalization equality and
    /// the throughput floor written as `-sum s x <= -T_th`. Variables are
    /// non-negative; `x <= 1` follows from normalization and is not added as
    /// separate rows.
    pub fn lp(&self, q: f64, min_throughput: f64) -> LinearProgram {
        let n_cols = self.columns.len();
        let objective = self.drop.iter().zip(&self.new_packet).map(|(d, n)| d - q * n).collect();
        let mut lp = LinearProgram::new(objective);
        let mut balance = vec![vec![0.0; n_cols]; self.space.len()];
        for (col, &(state, _)) in self.columns.iter().enumerate() {
            balance[state][col] += 1.0;
            for &(next, p) in &self.transitions[col] {
                balance[next][col] -= p;
            }
        }
        for row in balance {
            lp.add_eq(row, 0.0);
        }
        lp.add_eq(vec![1.0; n_cols], 1.0);
        lp.add_ge(self.success.clone(), min_throughput);
        lp
    }

    pub fn measure(&self, x: &[f64]) -> OccupationMeasure {
        assert_eq!(x.len(), self.columns.len());
        OccupationMeasure {
            space: self.space,
            entries: self.columns.iter().zip(x).map(|(&(s, a), &m)| (s, a, m)).collect(),
        }
    }

    fn dot(&self, weights: &[f64], x: &OccupationMeasure) -> f64 {
        weights.iter().zip(&x.entries).map(|(w, e)| w * e.2).sum()
    }

    pub fn drop_rate(&self, x: &OccupationMeasure) -> f64 {
        self.dot(&self.drop, x)
    }

    pub fn new_packet_rate(&self, x: &OccupationMeasure) -> f64 {
        self.dot(&self.new_packet, x)
    }

    pub fn throughput(&self, x: &OccupationMeasure) -> f64 {
        self.dot(&self.success, x)
    }
}

/// `build_weighted_lp` in one call; see [`CmdpModel::lp`].
pub fn build_weighted_lp(
    q: f64,
    min_throughput: f64,
    params: &LinkParameters,
    protocol: Protocol,
) -> Result<LinearProgram, ModelError> {
    Ok(CmdpModel::new(params, protocol)?.lp(q, min_throughput))
}

/// Steady-state probability of each `(state index, action)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMeasure {
    space: StateSpace,
    entries: Vec<(usize, Action, f64)>,
}

/// Constraint residuals of an occupation measure, recomputed from the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureResiduals {
    pub balance: f64,
    pub normalization: f64,
    /// `max(0, T_th - throughput)`.
    pub throughput_shortfall: f64,
    pub min_mass: f64,
    /// Mass on pairs outside the protocol's feasible sets.
    pub infeasible_mass: f64,
}

impl MeasureResiduals {
    pub fn max(&self) -> f64 {
        self.balance
            .max(self.normalization)
            .max(self.throughput_shortfall)
            .max(-self.min_mass.min(0.0))
            .max(self.infeasible_mass)
    }
}

impl OccupationMeasure {
    pub fn entries(&self) -> &[(usize, Action, f64)] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    pub fn state_mass(&self) -> Vec<f64> {
        let mut mass = vec![0.0; self.space.len()];
        for &(s, _, m) in &self.entries {
            mass[s] += m;
        }
        mass
    }

    /// Checks balance, normalization, throughput and support directly
    /// against the transition kernel.
    pub fn residuals(
        &self,
        params: &LinkParameters,
        protocol: Protocol,
        min_throughput: f64,
    ) -> Result<MeasureResiduals, ModelError> {
        let space = self.space;
        let mut inflow = vec![0.0; space.len()];
        let mut throughput = 0.0;
        let mut infeasible_mass = 0.0;
        for &(s, a, m) in &self.entries {
            let state = space.state(s);
            if !feasible_actions(&state, protocol, params).contains(&a) {
                infeasible_mass += m.abs();
                continue;
            }
            throughput += reward_s(&state, a, params) * m;
            for e in transition_distribution(&state, a, params)? {
                inflow[space.index(&e.next_state)] += e.probability * m;
            }
        }
        let outflow = self.state_mass();
        let balance = inflow.iter().zip(&outflow).fold(0.0_f64, |acc, (i, o)| acc.max((i - o).abs()));
        Ok(MeasureResiduals {
            balance,
            normalization: (self.total() - 1.0).abs(),
            throughput_shortfall: (min_throughput - throughput).max(0.0),
            min_mass: self.entries.iter().map(|e| e.2).fold(f64::INFINITY, f64::min),
            infeasible_mass,
        })
    }
}

/// `psi(a|s) = x(s,a) / sum_a x(s,a)`; idle where the state carries no mass.
pub fn occupation_to_policy(x: &OccupationMeasure) -> Policy {
    let mass = x.state_mass();
    let mut rules: Vec<Vec<(Action, f64)>> = vec![Vec::new(); x.space.len()];
    for &(s, a, m) in &x.entries {
        if mass[s] > 0.0 && m > 0.0 {
            rules[s].push((a, m / mass[s]));
        }
    }
    for rule in rules.iter_mut() {
        if rule.is_empty() {
            rule.push((Action::IDLE, 1.0));
        }
    }
    Policy::from_rules(rules)
}
