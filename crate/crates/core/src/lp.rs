//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Minimizes `c·x` subject to `A_eq x = b_eq`, `A_ub x <= b_ub` and per-variable
//! bounds `lo <= x <= hi` (finite `lo`, possibly infinite `hi`). Lower bounds
//! are shifted out; finite upper bounds become extra `<=` rows.

use thiserror::Error;

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-9;
/// Reduced costs above `-OPT_TOL` count as non-negative.
pub const OPT_TOL: f64 = 1e-10;
/// Smallest tableau entry accepted as a pivot.
const PIVOT_EPS: f64 = 1e-7;
/// Entries this small after a pivot are rounding residue.
const DROP_TOL: f64 = 1e-13;
const MAX_PIVOTS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex did not terminate within {0} pivots")]
    PivotLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Optimal point; empty unless `status` is `Optimal`.
    pub solution: Vec<f64>,
    /// `c·x*` when optimal, NaN otherwise.
    pub objective_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    eq_rows: Vec<Vec<f64>>,
    eq_rhs: Vec<f64>,
    ub_rows: Vec<Vec<f64>>,
    ub_rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LinearProgram {
    /// `min c·x` over `x >= 0` with no constraints yet.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            ub_rows: Vec::new(),
            ub_rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn set_objective(&mut self, objective: Vec<f64>) {
        self.objective = objective;
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) {
        self.ub_rows.push(row);
        self.ub_rhs.push(rhs);
    }

    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) {
        self.add_le(row.into_iter().map(|v| -v).collect(), -rhs);
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.lower[var] = lo;
        self.upper[var] = hi;
    }

    pub fn eq_constraints(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.eq_rows.iter().map(Vec::as_slice).zip(self.eq_rhs.iter().copied())
    }

    pub fn ub_constraints(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.ub_rows.iter().map(Vec::as_slice).zip(self.ub_rhs.iter().copied())
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    /// Largest constraint or bound violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let eq = self.eq_constraints().map(|(r, b)| (dot(r) - b).abs());
        let ub = self.ub_constraints().map(|(r, b)| (dot(r) - b).max(0.0));
        let bnd = x
            .iter()
            .enumerate()
            .map(|(j, v)| (self.lower[j] - v).max(v - self.upper[j]).max(0.0));
        eq.chain(ub).chain(bnd).fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        let finite = |v: &f64| v.is_finite();
        if !self.objective.iter().all(finite) {
            return Err(LpError::Malformed("non-finite objective coefficient".into()));
        }
        for (kind, rows, rhs) in
            [("equality", &self.eq_rows, &self.eq_rhs), ("inequality", &self.ub_rows, &self.ub_rhs)]
        {
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(LpError::Malformed(format!(
                        "{kind} row {i} has {} coefficients, expected {n}",
                        row.len()
                    )));
                }
                if !row.iter().all(finite) || !rhs[i].is_finite() {
                    return Err(LpError::Malformed(format!("{kind} row {i} is not finite")));
                }
            }
        }
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if !lo.is_finite() {
                return Err(LpError::Malformed(format!("variable {j} needs a finite lower bound")));
            }
            if hi.is_nan() || lo > hi {
                return Err(LpError::Malformed(format!("variable {j} has bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

struct Tableau {
    /// Structural plus slack columns; artificials follow.
    real_cols: usize,
    width: usize,
    rows: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.width - 1
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let rhs = self.rhs();
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        let eliminate = |row: &mut Vec<f64>| {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                    if v.abs() < DROP_TOL {
                        *v = 0.0;
                    }
                }
                row[c] = 0.0;
            }
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
                if row[rhs] < 0.0 && row[rhs] > -FEAS_TOL {
                    row[rhs] = 0.0;
                }
            }
        }
        eliminate(&mut self.obj);
        self.rows[r] = pivot_row;
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Bland's rule: lowest-index improving column enters. Among minimum-ratio
    /// rows the largest pivot leaves, then the lowest basic index; picking
    /// tiny pivots on degenerate ties blows up the tableau.
    fn optimize(&mut self) -> Result<Phase, LpError> {
        let rhs = self.rhs();
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(LpError::PivotLimit(MAX_PIVOTS));
            }
            let Some(enter) = (0..self.real_cols).find(|&j| self.obj[j] < -OPT_TOL) else {
                return Ok(Phase::Optimal);
            };
            // Two-pass ratio test: the loosest step that keeps every basic
            // variable above -FEAS_TOL, then the largest pivot within it.
            let bound = self
                .rows
                .iter()
                .filter(|row| row[enter] > PIVOT_EPS)
                .map(|row| (row[rhs].max(0.0) + FEAS_TOL) / row[enter])
                .fold(f64::INFINITY, f64::min);
            let mut leave: Option<usize> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[enter];
                if a <= PIVOT_EPS || row[rhs].max(0.0) / a > bound {
                    continue;
                }
                leave = match leave {
                    Some(bi) => {
                        let ba = self.rows[bi][enter];
                        let larger = a > ba * (1.0 + 1e-9);
                        let same = a >= ba * (1.0 - 1e-9);
                        if larger || (same && self.basis[i] < self.basis[bi]) {
                            Some(i)
                        } else {
                            Some(bi)
                        }
                    }
                    None => Some(i),
                };
            }
            match leave {
                Some(r) => self.pivot(r, enter),
                None => return Ok(Phase::Unbounded),
            }
        }
    }
}

/// Indices of a maximal linearly independent subset of equality rows, in
/// order. `None` if a dependent row contradicts the others.
fn independent_rows(rows: &[(Vec<f64>, f64)]) -> Option<Vec<usize>> {
    let mut basis: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    let mut keep = Vec::new();
    for (i, (row, b)) in rows.iter().enumerate() {
        let scale = row.iter().fold(b.abs(), |acc, v| acc.max(v.abs())).max(1.0);
        let mut r = row.clone();
        let mut rb = *b;
        for (pivot, prow, pb) in &basis {
            let f = r[*pivot] / prow[*pivot];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(prow) {
                    *v -= f * pv;
                }
                rb -= f * pb;
            }
        }
        let (pivot, size) =
            r.iter().enumerate().fold((0, 0.0), |best, (j, v)| if v.abs() > best.1 { (j, v.abs()) } else { best });
        if size <= FEAS_TOL * scale {
            if rb.abs() > FEAS_TOL * scale {
                return None;
            }
            continue;
        }
        basis.push((pivot, r, rb));
        keep.push(i);
    }
    Some(keep)
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    lp.validate()?;
    let n = lp.num_vars();
    let shift = |row: &[f64], b: f64| b - row.iter().zip(&lp.lower).map(|(a, l)| a * l).sum::<f64>();

    // Shifted rows: (coefficients, rhs, is_inequality).
    let mut raw: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    let eq: Vec<(Vec<f64>, f64)> = lp.eq_constraints().map(|(row, b)| (row.to_vec(), shift(row, b))).collect();
    let Some(keep) = independent_rows(&eq) else {
        return Ok(LpOutcome { status: LpStatus::Infeasible, solution: Vec::new(), objective_value: f64::NAN });
    };
    for i in keep {
        let (row, b) = &eq[i];
        raw.push((row.clone(), *b, false));
    }
    for (row, b) in lp.ub_constraints() {
        raw.push((row.to_vec(), shift(row, b), true));
    }
    for j in 0..n {
        let (lo, hi) = lp.bounds(j);
        if hi.is_finite() {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            raw.push((row, hi - lo, true));
        }
    }

    let n_slack = raw.iter().filter(|r| r.2).count();
    let real_cols = n + n_slack;
    let needs_art: Vec<bool> = raw.iter().map(|(_, b, ineq)| !(*ineq && *b >= 0.0)).collect();
    let n_art = needs_art.iter().filter(|&&x| x).count();
    let width = real_cols + n_art + 1;
    let rhs = width - 1;

    let mut rows = Vec::with_capacity(raw.len());
    let mut basis = Vec::with_capacity(raw.len());
    let mut slack = n;
    let mut art = real_cols;
    for ((coeffs, b, ineq), art_needed) in raw.into_iter().zip(&needs_art) {
        let mut row = vec![0.0; width];
        row[..n].copy_from_slice(&coeffs);
        let slack_col = ineq.then(|| {
            row[slack] = 1.0;
            slack += 1;
            slack - 1
        });
        row[rhs] = b;
        if b < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        if *art_needed {
            row[art] = 1.0;
            basis.push(art);
            art += 1;
        } else {
            basis.push(slack_col.expect("slack-basic rows are inequalities"));
        }
        rows.push(row);
    }

    let mut tab = Tableau { real_cols, width, rows, obj: vec![0.0; width], basis, pivots: 0 };

    if n_art > 0 {
        for (row, &b) in tab.rows.iter().zip(&tab.basis) {
            if b >= real_cols {
                for j in 0..width {
                    if j < real_cols || j == rhs {
                        tab.obj[j] -= row[j];
                    }
                }
            }
        }
        // Unbounded is impossible here: the phase-1 objective is bounded below by zero.
        tab.optimize()?;
        let infeasibility = -tab.obj[rhs];
        if infeasibility > FEAS_TOL {
            return Ok(LpOutcome {
                status: LpStatus::Infeasible,
                solution: Vec::new(),
                objective_value: f64::NAN,
            });
        }
        // Drive zero-level artificials out of the basis; rows where that is
        // impossible are linear combinations of the others.
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= real_cols {
                let row = &tab.rows[r];
                match (0..real_cols).find(|&j| row[j].abs() > PIVOT_EPS) {
                    Some(j) => {
                        tab.pivot(r, j);
                        r += 1;
                    }
                    None => {
                        tab.rows.remove(r);
                        tab.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }

    let cost = |j: usize| if j < n { lp.objective[j] } else { 0.0 };
    tab.obj = vec![0.0; width];
    for (j, o) in tab.obj.iter_mut().enumerate().take(real_cols) {
        *o = cost(j);
    }
    for (row, &b) in tab.rows.iter().zip(&tab.basis) {
        let cb = cost(b);
        if cb != 0.0 {
            for (o, v) in tab.obj.iter_mut().zip(row) {
                *o -= cb * v;
            }
        }
    }
    match tab.optimize()? {
        Phase::Unbounded => Ok(LpOutcome {
            status: LpStatus::Unbounded,
            solution: Vec::new(),
            objective_value: f64::NAN,
        }),
        Phase::Optimal => {
            let mut x = lp.lower.clone();
            for (row, &b) in tab.rows.iter().zip(&tab.basis) {
                if b < n {
                    x[b] += row[rhs].max(0.0);
                }
            }
            let objective_value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            Ok(LpOutcome { status: LpStatus::Optimal, solution: x, objective_value })
        }
    }
}
