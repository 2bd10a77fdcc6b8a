//! The acceptance checks, runnable from tests and from `eharq verify`.
//!
//! Each check returns a [`CheckOutcome`]; [`run_all`] runs the eight in
//! order. The identity check (5) also covers every point evaluated by the
//! other checks, so it is computed last and reported in its place.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::chain::{analyze_policy, evaluate_policy, PerformancePoint};
use crate::model::{
    feasible_actions, transition_distribution, ChannelModel, EnergyQuanta, HarvestDistribution,
    LinkConfig, LinkParameters, Protocol,
};
use crate::opt::{
    brute_force_best_policy, closed_forms_unconstrained, dinkelbach_solve, enumerate_deterministic,
    myopic_policy, solve_no_feedback, BruteForceObjective, OptError, SolveReport,
    DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE,
};
use crate::sim::{estimate_with_ci, simulate, SimConfig};

/// `exp(-(sqrt 2 - 1))`, computed to 30 digits offline.
pub const REFERENCE_SUCCESS_PROB: f64 = 0.660_859_801_406_827_9;
/// `(1 - REFERENCE_SUCCESS_PROB)^4`.
pub const REFERENCE_ALL_FAIL_4: f64 = 0.013_228_697_347_800_903;

pub const RHO_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Throughput floors of the success-probability sweep.
pub fn tth_grid() -> Vec<f64> {
    (0..=26).map(|i| i as f64 / 40.0).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{verdict}] {}. {} ({:.2}s): {}", self.id, self.name, self.seconds, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub horizon: u64,
    pub replications: usize,
    /// Test hook: added to the first probability of every transition row
    /// before the row-sum check.
    pub kernel_perturbation: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            tolerance: DEFAULT_TOLERANCE,
            seed: 20_160_101,
            horizon: 1_000_000,
            replications: 10,
            kernel_perturbation: 0.0,
        }
    }
}

/// Largest `|n - d - s|` seen so far, over how many evaluations.
#[derive(Debug, Default)]
pub struct IdentityLog {
    inner: Mutex<(usize, f64)>,
}

impl IdentityLog {
    pub fn record(&self, residual: f64) {
        let mut g = self.inner.lock().unwrap();
        g.0 += 1;
        if !(residual <= g.1) {
            g.1 = residual;
        }
    }

    pub fn point(&self, p: &PerformancePoint) {
        self.record(p.identity_residual());
    }

    pub fn report(&self, r: &SolveReport) {
        if r.is_feasible() {
            let drop_rate = r.pdp * r.new_packet_rate;
            self.record((r.new_packet_rate - drop_rate - r.throughput).abs());
        }
    }

    pub fn summary(&self) -> (usize, f64) {
        *self.inner.lock().unwrap()
    }
}

/// Reference link with the given harvest probability, attempts and ACK cost.
pub fn reference_link(rho: f64, max_attempts: usize, cost_feedback: u32) -> LinkParameters {
    LinkConfig {
        max_attempts,
        cost_feedback: EnergyQuanta(cost_feedback),
        harvest: HarvestDistribution::bernoulli(EnergyQuanta(6), rho).expect("rho in [0, 1]"),
        ..LinkConfig::reference()
    }
    .build()
    .expect("reference parameters are valid")
}

/// Instance small enough to enumerate: two attempts, a 3-quantum battery,
/// unit costs and 2 quanta harvested with probability one half.
pub fn small_instance() -> LinkParameters {
    LinkConfig {
        channel: ChannelModel::Rayleigh { rate: 0.5, tx_power: 1.0, mean_gain: 1.0 },
        max_attempts: 2,
        battery_capacity: EnergyQuanta(3),
        cost_sample: EnergyQuanta(1),
        cost_decode: EnergyQuanta(1),
        cost_feedback: EnergyQuanta(1),
        harvest: HarvestDistribution::bernoulli(EnergyQuanta(2), 0.5).expect("valid"),
    }
    .build()
    .expect("valid")
}

fn free_energy_link() -> LinkParameters {
    LinkConfig {
        cost_sample: EnergyQuanta(0),
        cost_decode: EnergyQuanta(0),
        cost_feedback: EnergyQuanta(0),
        ..LinkConfig::reference()
    }
    .build()
    .expect("valid")
}

struct Check {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { failures: Vec::new(), notes: Vec::new() }
    }

    fn expect(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(msg());
        }
    }

    fn fail(&mut self, msg: String) {
        self.failures.push(msg);
    }

    fn note(&mut self, msg: String) {
        self.notes.push(msg);
    }

    fn finish(self, id: u8, name: &'static str, started: Instant, limit: Option<Duration>) -> CheckOutcome {
        let elapsed = started.elapsed();
        let mut failures = self.failures;
        if let Some(limit) = limit {
            if elapsed > limit {
                failures.push(format!("took {:.2}s, limit {}s", elapsed.as_secs_f64(), limit.as_secs()));
            }
        }
        let passed = failures.is_empty();
        let detail = if passed { self.notes.join("; ") } else { failures.join("; ") };
        CheckOutcome { id, name, passed, detail, seconds: elapsed.as_secs_f64() }
    }
}

/// Solve with the options' Dinkelbach settings; the iteration limit is an
/// error string.
fn optimal(
    params: &LinkParameters,
    protocol: Protocol,
    tth: f64,
    opts: &VerifyOptions,
) -> Result<SolveReport, String> {
    match protocol {
        Protocol::NoFeedback => solve_no_feedback(params, tth),
        _ => dinkelbach_solve(params, protocol, tth, opts.max_iterations, opts.tolerance),
    }
    .map_err(|e: OptError| format!("{protocol} at T_th={tth}: {e}"))
}

/// 1. Free-energy limits.
pub fn check_free_energy_limits(opts: &VerifyOptions, log: &IdentityLog) -> CheckOutcome {
    let started = Instant::now();
    let mut c = Check::new();
    let p = free_energy_link();
    let pc = p.success_prob();
    c.expect((pc - REFERENCE_SUCCESS_PROB).abs() <= 1e-12, || format!("p_c = {pc}"));
    let closed = closed_forms_unconstrained(4, pc);
    c.expect((closed.pdp_no_feedback - REFERENCE_ALL_FAIL_4).abs() <= 1e-9, || {
        format!("closed-form pdp {}", closed.pdp_no_feedback)
    });
    match evaluate_policy(&myopic_policy(Protocol::NoFeedback, &p), &p, Protocol::NoFeedback) {
        Ok(point) => {
            log.point(&point);
            c.expect((point.pdp - REFERENCE_ALL_FAIL_4).abs() <= 1e-9, || {
                format!("myopic no-feedback pdp {} vs {REFERENCE_ALL_FAIL_4}", point.pdp)
            });
            c.note(format!("myopic wo pdp {:.12}", point.pdp));
        }
        Err(e) => c.fail(format!("myopic no-feedback: {e}")),
    }
    for tth in [0.2, pc * (1.0 - 1e-9)] {
        match optimal(&p, Protocol::NonAdaptiveFeedback, tth, opts) {
            Ok(r) if r.is_feasible() => {
                log.report(&r);
                c.expect((r.pdp - REFERENCE_ALL_FAIL_4).abs() <= 1e-6, || {
                    format!("na pdp {} at T_th={tth}", r.pdp)
                });
                c.note(format!("na pdp {:.9} at T_th={tth:.6}", r.pdp));
            }
            Ok(_) => c.fail(format!("na infeasible at T_th={tth}")),
            Err(e) => c.fail(e),
        }
    }
    match optimal(&p, Protocol::NonAdaptiveFeedback, pc + 1e-3, opts) {
        Ok(r) => c.expect(!r.is_feasible(), || "na feasible above p_c".into()),
        Err(e) => c.fail(e),
    }
    c.finish(1, "free-energy limits", started, Some(Duration::from_secs(5)))
}

/// 2. Without feedback the myopic policy is throughput-optimal.
pub fn check_myopic_optimality(_opts: &VerifyOptions, log: &IdentityLog) -> CheckOutcome {
    let started = Instant::now();
    let mut c = Check::new();
    let p = small_instance();
    let proto = Protocol::NoFeedback;
    match enumerate_deterministic(&p, proto) {
        Ok(all) => all.iter().filter_map(|(_, r)| r.as_ref().ok()).for_each(|pt| log.point(pt)),
        Err(e) => c.fail(e.to_string()),
    }
    let best = brute_force_best_policy(&p, proto, BruteForceObjective::MaxThroughput);
    let myopic = evaluate_policy(&myopic_policy(proto, &p), &p, proto);
    match (best, myopic) {
        (Ok(best), Ok(m)) => {
            log.point(&m);
            let diff = (best.report.throughput - m.throughput).abs();
            c.expect(diff <= 1e-10, || {
                format!("brute force {} vs myopic {} (diff {diff:e})", best.report.throughput, m.throughput)
            });
            c.note(format!(
                "{} policies, best throughput {:.12}, |diff| {diff:.1e}",
                best.evaluated, best.report.throughput
            ));
        }
        (Err(e), _) => c.fail(e.to_string()),
        (_, Err(e)) => c.fail(e.to_string()),
    }
    c.finish(2, "myopic optimality without feedback", started, Some(Duration::from_secs(60)))
}

/// 3. Dinkelbach against exhaustive enumeration on the small instance.
pub fn check_lp_against_enumeration(opts: &VerifyOptions, log: &IdentityLog) -> CheckOutcome {
    let started = Instant::now();
    let mut c = Check::new();
    let p = small_instance();
    let proto = Protocol::AdaptiveFeedback;
    match enumerate_deterministic(&p, proto) {
        Ok(all) => all.iter().filter_map(|(_, r)| r.as_ref().ok()).for_each(|pt| log.point(pt)),
        Err(e) => c.fail(e.to_string()),
    }
    let mut compared = 0;
    for tth in [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35] {
        let bf = match brute_force_best_policy(&p, proto, BruteForceObjective::MinPdpSubjectTo(tth)) {
            Ok(b) => b.report,
            Err(e) => {
                c.fail(e.to_string());
                continue;
            }
        };
        let lp = match optimal(&p, proto, tth, opts) {
            Ok(r) => r,
            Err(e) => {
                c.fail(e);
                continue;
            }
        };
        log.report(&lp);
        if tth == 0.0 {
            c.expect(bf.is_feasible() && lp.is_feasible() && (lp.pdp - bf.pdp).abs() <= 1e-7, || {
                format!("T_th=0: lp {} vs enumeration {}", lp.pdp, bf.pdp)
            });
            c.note(format!("T_th=0 pdp {:.10}", lp.pdp));
        } else if bf.is_feasible() {
            compared += 1;
            c.expect(lp.is_feasible() && lp.pdp <= bf.pdp + 1e-7, || {
                format!("T_th={tth}: lp {} above enumeration {}", lp.pdp, bf.pdp)
            });
        }
    }
    c.expect(compared > 0, || "no feasible positive floor".into());
    c.note(format!("{compared} positive floors within bound"));
    c.finish(3, "LP against enumeration", started, None)
}

/// 4. Transition rows and occupation measures.
pub fn check_kernel_and_measures(opts: &VerifyOptions, log: &IdentityLog) -> CheckOutcome {
    let started = Instant::now();
    let mut c = Check::new();
    let mut worst_row = 0.0_f64;
    let mut worst_measure = 0.0_f64;
    let mut measures = 0;
    let mut combos = 0;
    for rho in [0.3, 0.5, 0.7, 0.9] {
        for k in [2, 3, 4] {
            for ef in [1, 2] {
                let p = reference_link(rho, k, ef);
                combos += 1;
                for proto in Protocol::ALL {
                    for s in p.state_space().iter() {
                        for a in feasible_actions(&s, proto, &p) {
                            match transition_distribution(&s, a, &p) {
                                Ok(entries) => {
                                    let sum: f64 = entries.iter().map(|e| e.probability).sum::<f64>()
                                        + opts.kernel_perturbation;
                                    worst_row = worst_row.max((sum - 1.0).abs());
                                }
                                Err(e) => c.fail(format!("{s} {a}: {e}")),
                            }
                        }
                    }
                }
                for proto in [Protocol::NonAdaptiveFeedback, Protocol::AdaptiveFeedback] {
                    let r = match optimal(&p, proto, 0.2, opts) {
                        Ok(r) => r,
                        Err(e) => {
                            c.fail(e);
                            continue;
                        }
                    };
                    log.report(&r);
                    let Some(x) = r.occupation.as_ref() else { continue };
                    match x.residuals(&p, proto, 0.2) {
                        Ok(res) => {
                            measures += 1;
                            worst_measure = worst_measure.max(res.max());
                        }
                        Err(e) => c.fail(e.to_string()),
                    }
                    if let Some(policy) = &r.policy {
                        if let Ok(pt) = evaluate_policy(policy, &p, proto) {
                            log.point(&pt);
                        }
                    }
                }
            }
        }
    }
    c.expect(worst_row <= 1e-12, || format!("transition row sum off by {worst_row:e}"));
    c.expect(worst_measure <= 1e-9, || format!("occupation measure residual {worst_measure:e}"));
    c.expect(measures >= 20, || format!("only {measures} converged measures"));
    c.note(format!(
        "{combos} links, row error {worst_row:.1e}, {measures} measures, residual {worst_measure:.1e}"
    ));
    c.finish(4, "kernel and measure invariants", started, None)
}

/// 5. Rate identity; `log` holds the points from the other checks.
pub fn check_rate_identity(opts: &VerifyOptions, log: &IdentityLog) -> CheckOutcome {
    let started = Instant::now();
    let mut c = Check::new();
    let mut worst_gap = 0_i64;
    let mut runs = 0;
    for proto in Protocol::ALL {
        for (p, seed) in [(LinkConfig::reference().build().expect("valid"), opts.seed), (small_instance(), opts.seed + 1)] {
            let policy = myopic_policy(proto, &p);
            if let Ok(pt) = evaluate_policy(&policy, &p, proto) {
                log.point(&pt);
            }
            for horizon in [1, 2, 3, 97, 10_000] {
                let cfg = SimConfig { horizon, seed, params: &p, protocol: proto, policy: &policy };
                match simulate(&cfg) {
                    Ok(est) => {
                        runs += 1;
                        let gap = est.counting_gap();
                        if gap.abs() > worst_gap.abs() {
                            worst_gap = gap;
                        }
                    }
                    Err(e) => c.fail(e.to_string()),
                }
            }
        }
    }
    let (count, worst) = log.summary();
    c.expect(worst <= 1e-10, || format!("rate identity residual {worst:e} over {count} evaluations"));
    c.expect(worst_gap.abs() <= 1, || format!("trajectory counting gap {worst_gap}"));
    c.note(format!("{count} evaluations, residual {worst:.1e}; {runs} trajectories, gap <= {}", worst_gap.abs()));
    c.finish(5, "rate identity", started, None)
}

/// 6. Monte Carlo against chain analysis for the myopic adaptive policy.
pub fn check_simulation_agreement(opts: &VerifyOptions, log: &IdentityLog) -> CheckOutcome {
    let started = Instant::now();
    let mut c = Check::new();
    let p = LinkConfig::reference().build().expect("valid");
    let proto = Protocol::AdaptiveFeedback;
    let policy = myopic_policy(proto, &p);
    let analysis = match analyze_policy(&policy, &p, proto) {
        Ok(a) => a,
        Err(e) => {
            c.fail(e.to_string());
            return c.finish(6, "simulation agreement", started, None);
        }
    };
    log.point(&analysis.point);
    let cfg = SimConfig { horizon: opts.horizon, seed: opts.seed, params: &p, protocol: proto, policy: &policy };
    match estimate_with_ci(&cfg, opts.replications) {
        Ok(est) => {
            let pdp_z = (est.pdp_mean - analysis.point.pdp) / est.pdp_se;
            let tp_z = (est.throughput_mean - analysis.point.throughput) / est.throughput_se;
            let tv = analysis.steady.total_variation(&est.state_visit_freq);
            c.expect(pdp_z.abs() <= 3.0, || {
                format!("pdp {} vs {} ({pdp_z:.2} SE)", est.pdp_mean, analysis.point.pdp)
            });
            c.expect(tp_z.abs() <= 3.0, || {
                format!("throughput {} vs {} ({tp_z:.2} SE)", est.throughput_mean, analysis.point.throughput)
            });
            c.expect(tv <= 0.01, || format!("visit-frequency TV distance {tv}"));
            for rep in &est.replications {
                c.expect(rep.counting_gap().abs() <= 1, || format!("counting gap {}", rep.counting_gap()));
            }
            c.note(format!(
                "pdp {:.6} vs {:.6} ({pdp_z:+.2} SE), throughput {:.6} vs {:.6} ({tp_z:+.2} SE), TV {tv:.4}",
                est.pdp_mean, analysis.point.pdp, est.throughput_mean, analysis.point.throughput
            ));
        }
        Err(e) => c.fail(e.to_string()),
    }
    c.finish(6, "simulation agreement", started, Some(Duration::from_secs(30)))
}

/// 7. Protocol dominance and Dinkelbach behaviour over the harvest grid.
pub fn check_dominance(opts: &VerifyOptions, log: &IdentityLog) -> CheckOutcome {
    let started = Instant::now();
    let mut c = Check::new();
    let tth = 0.2;
    let mut feasible = 0;
    let mut max_iter = 0;
    for rho in RHO_GRID {
        let p = reference_link(rho, 4, 1);
        let solved: Vec<_> = Protocol::ALL.iter().map(|&proto| optimal(&p, proto, tth, opts)).collect();
        let [wo, na, a] = match <[Result<SolveReport, String>; 3]>::try_from(solved) {
            Ok([Ok(wo), Ok(na), Ok(a)]) => [wo, na, a],
            Ok(results) => {
                results.into_iter().filter_map(Result::err).for_each(|e| c.fail(e));
                continue;
            }
            Err(_) => unreachable!("three protocols"),
        };
        for r in [&wo, &na, &a] {
            log.report(r);
            if r.is_feasible() && r.protocol != Protocol::NoFeedback {
                feasible += 1;
                max_iter = max_iter.max(r.iterations);
                c.expect(r.converged && r.iterations <= opts.max_iterations, || {
                    format!("{} at rho={rho}: not converged", r.protocol)
                });
                c.expect(r.q_trace.windows(2).all(|w| w[1] < w[0]), || {
                    format!("{} at rho={rho}: q_trace {:?} not decreasing", r.protocol, r.q_trace)
                });
            }
        }
        if a.is_feasible() {
            if na.is_feasible() {
                c.expect(a.pdp <= na.pdp + 1e-9, || format!("rho={rho}: adaptive {} > na {}", a.pdp, na.pdp));
            }
            if wo.is_feasible() {
                c.expect(a.pdp <= wo.pdp + 1e-9, || format!("rho={rho}: adaptive {} > wo {}", a.pdp, wo.pdp));
            }
        } else {
            c.expect(!na.is_feasible() && !wo.is_feasible(), || format!("rho={rho}: adaptive infeasible alone"));
        }
    }
    c.expect(feasible > 0, || "no feasible grid point".into());
    c.note(format!("{feasible} feasible LP solves, at most {max_iter} iterations"));
    c.finish(7, "dominance over the harvest grid", started, None)
}

/// 8. Shape of the success-probability/throughput regions.
pub fn check_region_structure(opts: &VerifyOptions, log: &IdentityLog) -> CheckOutcome {
    let started = Instant::now();
    let mut c = Check::new();
    let grid = tth_grid();
    let mut ranges = Vec::new();
    for ef in [1, 2] {
        let p = reference_link(0.6, 4, ef);
        let mut wo_values = Vec::new();
        for &tth in &grid {
            match optimal(&p, Protocol::NoFeedback, tth, opts) {
                Ok(r) if r.is_feasible() => {
                    log.report(&r);
                    wo_values.push(r.success_prob());
                }
                Ok(_) => {}
                Err(e) => c.fail(e),
            }
        }
        let spread = wo_values.iter().fold(0.0_f64, |m, v| m.max((v - wo_values[0]).abs()));
        c.expect(!wo_values.is_empty() && spread <= 1e-12, || {
            format!("E_f={ef}: wo success probability varies by {spread:e} over {} points", wo_values.len())
        });
        for proto in [Protocol::NonAdaptiveFeedback, Protocol::AdaptiveFeedback] {
            let mut feasible = Vec::new();
            for &tth in &grid {
                match optimal(&p, proto, tth, opts) {
                    Ok(r) => {
                        log.report(&r);
                        feasible.push(r.is_feasible());
                    }
                    Err(e) => {
                        c.fail(e);
                        feasible.push(false);
                    }
                }
            }
            ranges.push((ef, proto, feasible));
        }
    }
    let top = |f: &[bool]| f.iter().rposition(|&x| x).map_or(f64::NAN, |i| grid[i]);
    for proto in [Protocol::NonAdaptiveFeedback, Protocol::AdaptiveFeedback] {
        let of = |ef| &ranges.iter().find(|r| r.0 == ef && r.1 == proto).expect("swept").2;
        let (low, high) = (of(1), of(2));
        let subset = high.iter().zip(low.iter()).all(|(&h, &l)| !h || l);
        c.expect(subset, || format!("{proto}: E_f=2 feasible where E_f=1 is not"));
        c.note(format!("{proto} max T_th {:.3} (E_f=1), {:.3} (E_f=2)", top(low), top(high)));
    }
    c.finish(8, "success/throughput region structure", started, None)
}

/// Results of all checks, in order.
pub fn run_all(opts: &VerifyOptions) -> Vec<CheckOutcome> {
    let log = IdentityLog::default();
    let mut out = vec![
        check_free_energy_limits(opts, &log),
        check_myopic_optimality(opts, &log),
        check_lp_against_enumeration(opts, &log),
        check_kernel_and_measures(opts, &log),
        check_simulation_agreement(opts, &log),
        check_dominance(opts, &log),
        check_region_structure(opts, &log),
    ];
    out.insert(4, check_rate_identity(opts, &log));
    out
}

pub fn all_passed(outcomes: &[CheckOutcome]) -> bool {
    outcomes.iter().all(|o| o.passed)
}
