use rayon::prelude::*;
use serde::Serialize;

use eharq::acceptance::{all_passed, run_all, CheckOutcome, VerifyOptions};
use eharq::chain::{analyze_policy, evaluate_policy, ChainError};
use eharq::model::{LinkParameters, Protocol};
use eharq::opt::{dinkelbach_solve, myopic_policy, solve_no_feedback, OptError};
use eharq::policy::PolicyRecord;
use eharq::sim::{estimate_with_ci, simulate, SimConfig};
use eharq::{Policy, SolveReport};

use crate::config::ExperimentConfig;
use crate::format::{field, sig, Csv};
use crate::{exit, CliError};

/// A command's main artifact, a one-line summary and its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub body: String,
    pub summary: String,
    pub code: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Optimal,
    Myopic,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Optimal => "optimal",
            PolicyKind::Myopic => "myopic",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimal" => Ok(PolicyKind::Optimal),
            "myopic" => Ok(PolicyKind::Myopic),
            other => Err(format!("unknown policy kind `{other}` (expected optimal or myopic)")),
        }
    }
}

fn opt_error(e: OptError) -> CliError {
    match e {
        OptError::Chain(ChainError::MultipleRecurrentClasses(m)) => CliError::Multichain(m),
        OptError::InvalidArgument(m) => CliError::Config(m),
        other => CliError::Numerical(other.to_string()),
    }
}

/// Optimal solution; the iteration limit comes back as the best report so
/// far with `converged = false`.
fn optimize(cfg: &ExperimentConfig, link: &LinkParameters, protocol: Protocol, tth: f64) -> Result<SolveReport, CliError> {
    let result = match protocol {
        Protocol::NoFeedback => solve_no_feedback(link, tth),
        _ => dinkelbach_solve(link, protocol, tth, cfg.imax, cfg.delta),
    };
    match result {
        Ok(r) => Ok(r),
        Err(OptError::IterationLimit(best)) => Ok(*best),
        Err(e) => Err(opt_error(e)),
    }
}

fn status_name(r: &SolveReport) -> &'static str {
    match (r.is_feasible(), r.converged) {
        (false, _) => "infeasible",
        (true, true) => "optimal",
        (true, false) => "iteration_limit",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveRecord {
    pub protocol: String,
    pub status: String,
    pub rho: f64,
    pub tth: f64,
    pub cost_feedback: u32,
    pub max_attempts: usize,
    pub pdp: f64,
    pub success_prob: f64,
    pub throughput: Option<f64>,
    pub new_packet_rate: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub q_trace: Vec<f64>,
    pub policy: Option<Vec<PolicyRecord>>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn run_solve(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    cfg.validate()?;
    let link = cfg.link()?;
    let r = optimize(cfg, &link, cfg.protocol, cfg.tth)?;
    let feasible = r.is_feasible();
    let record = SolveRecord {
        protocol: cfg.protocol.short_name().to_string(),
        status: status_name(&r).to_string(),
        rho: cfg.rho,
        tth: cfg.tth,
        cost_feedback: cfg.cost_feedback,
        max_attempts: cfg.max_attempts,
        pdp: r.pdp,
        success_prob: r.success_prob(),
        throughput: if feasible { finite(r.throughput) } else { None },
        new_packet_rate: finite(r.new_packet_rate),
        iterations: r.iterations,
        converged: r.converged,
        q_trace: r.q_trace.clone(),
        policy: r.policy.as_ref().map(|p| p.to_records(&link, cfg.protocol)),
    };
    let code = match record.status.as_str() {
        "infeasible" => exit::INFEASIBLE,
        "iteration_limit" => exit::NUMERICAL,
        _ => exit::OK,
    };
    let summary = format!(
        "{} rho={} tth={}: {} pdp={} throughput={} iterations={}",
        record.protocol,
        cfg.rho,
        cfg.tth,
        record.status,
        sig(record.pdp),
        record.throughput.map_or(String::new(), sig),
        record.iterations
    );
    let body = serde_json::to_string_pretty(&record).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    Ok(Output { body, summary, code })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicationRecord {
    pub drops: u64,
    pub new_packets: u64,
    pub successes: u64,
    pub pdp_hat: f64,
    pub throughput_hat: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationRecord {
    pub protocol: String,
    pub policy: String,
    pub rho: f64,
    pub horizon: u64,
    pub seed: u64,
    pub reps: usize,
    pub pdp_mean: f64,
    pub pdp_se: Option<f64>,
    pub throughput_mean: f64,
    pub throughput_se: Option<f64>,
    pub analytic_pdp: f64,
    pub analytic_throughput: f64,
    pub visit_tv_distance: f64,
    pub replications: Vec<ReplicationRecord>,
}

fn policy_for(cfg: &ExperimentConfig, link: &LinkParameters, kind: PolicyKind) -> Result<Policy, CliError> {
    match kind {
        PolicyKind::Myopic => Ok(myopic_policy(cfg.protocol, link)),
        PolicyKind::Optimal => {
            let r = optimize(cfg, link, cfg.protocol, cfg.tth)?;
            r.policy.ok_or(CliError::Infeasible(format!(
                "{} cannot reach throughput {} at rho={}",
                cfg.protocol, cfg.tth, cfg.rho
            )))
        }
    }
}

pub fn run_simulate(cfg: &ExperimentConfig, kind: PolicyKind) -> Result<Output, CliError> {
    cfg.validate()?;
    let link = cfg.link()?;
    let policy = policy_for(cfg, &link, kind)?;
    let analysis = analyze_policy(&policy, &link, cfg.protocol).map_err(|e| match e {
        ChainError::MultipleRecurrentClasses(m) => CliError::Multichain(m),
        other => CliError::Numerical(other.to_string()),
    })?;
    let sim_cfg = SimConfig { horizon: cfg.horizon, seed: cfg.seed, params: &link, protocol: cfg.protocol, policy: &policy };
    let sim_err = |e: eharq::sim::SimError| CliError::Numerical(e.to_string());
    let (reps, pdp, pdp_se, tp, tp_se, visits) = if cfg.reps >= 2 {
        let est = estimate_with_ci(&sim_cfg, cfg.reps).map_err(sim_err)?;
        let visits = est.state_visit_freq.clone();
        (est.replications, est.pdp_mean, Some(est.pdp_se), est.throughput_mean, Some(est.throughput_se), visits)
    } else {
        let est = simulate(&sim_cfg).map_err(sim_err)?;
        let (pdp, tp, visits) = (est.pdp_hat, est.throughput_hat, est.state_visit_freq.clone());
        (vec![est], pdp, None, tp, None, visits)
    };
    let record = SimulationRecord {
        protocol: cfg.protocol.short_name().to_string(),
        policy: kind.name().to_string(),
        rho: cfg.rho,
        horizon: cfg.horizon,
        seed: cfg.seed,
        reps: reps.len(),
        pdp_mean: pdp,
        pdp_se,
        throughput_mean: tp,
        throughput_se: tp_se,
        analytic_pdp: analysis.point.pdp,
        analytic_throughput: analysis.point.throughput,
        visit_tv_distance: analysis.steady.total_variation(&visits),
        replications: reps
            .iter()
            .map(|e| ReplicationRecord {
                drops: e.drops,
                new_packets: e.new_packets,
                successes: e.successes,
                pdp_hat: e.pdp_hat,
                throughput_hat: e.throughput_hat,
            })
            .collect(),
    };
    let summary = format!(
        "{} {} policy: pdp {} (analytic {}), throughput {} (analytic {}), TV {}",
        record.protocol,
        record.policy,
        sig(pdp),
        sig(record.analytic_pdp),
        sig(tp),
        sig(record.analytic_throughput),
        sig(record.visit_tv_distance)
    );
    let body = serde_json::to_string_pretty(&record).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    Ok(Output { body, summary, code: exit::OK })
}

fn pool(cfg: &ExperimentConfig) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Io(e.to_string()))
}

/// `(status, pdp, throughput)` of one operating point; infeasible points
/// report a drop probability of one and no throughput.
fn point(cfg: &ExperimentConfig, protocol: Protocol, kind: PolicyKind, rho: f64, ef: u32, tth: f64) -> (String, Option<f64>, Option<f64>) {
    let link = match cfg.link_at(rho, ef) {
        Ok(l) => l,
        Err(e) => return (field(&format!("error: {e}")), None, None),
    };
    match kind {
        PolicyKind::Optimal => match optimize(cfg, &link, protocol, tth) {
            Ok(r) if r.is_feasible() => (status_name(&r).into(), Some(r.pdp), Some(r.throughput)),
            Ok(_) => ("infeasible".into(), Some(1.0), None),
            Err(e) => (field(&format!("error: {e}")), None, None),
        },
        PolicyKind::Myopic => match evaluate_policy(&myopic_policy(protocol, &link), &link, protocol) {
            Ok(p) if p.throughput >= tth => ("feasible".into(), Some(p.pdp), Some(p.throughput)),
            Ok(_) => ("infeasible".into(), Some(1.0), None),
            Err(e) => (field(&format!("error: {e}")), None, None),
        },
    }
}

fn opt_sig(x: Option<f64>) -> String {
    x.map_or(String::new(), sig)
}

pub const SWEEP_RHO_HEADER: [&str; 6] = ["protocol", "policy", "rho", "status", "pdp", "throughput"];
pub const SWEEP_TTH_HEADER: [&str; 6] = ["protocol", "ef", "tth", "status", "success_prob", "throughput"];

/// Drop probability against harvest probability for every protocol, with
/// optimal and myopic policies, at the configured throughput floor.
pub fn run_sweep_rho(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    cfg.validate()?;
    let mut points = Vec::new();
    for protocol in Protocol::ALL {
        for kind in [PolicyKind::Optimal, PolicyKind::Myopic] {
            for &rho in &cfg.rho_grid {
                points.push((protocol, kind, rho));
            }
        }
    }
    let rows: Vec<Vec<String>> = pool(cfg)?.install(|| {
        points
            .par_iter()
            .map(|&(protocol, kind, rho)| {
                let (status, pdp, tp) = point(cfg, protocol, kind, rho, cfg.cost_feedback, cfg.tth);
                vec![protocol.short_name().into(), kind.name().into(), sig(rho), status, opt_sig(pdp), opt_sig(tp)]
            })
            .collect()
    });
    let mut csv = Csv::new(&SWEEP_RHO_HEADER);
    let n = rows.len();
    rows.into_iter().for_each(|r| csv.row(r));
    Ok(Output { body: csv.into_string(), summary: format!("{n} rows"), code: exit::OK })
}

/// Success probability against throughput floor for every protocol and
/// feedback cost, under optimal policies.
pub fn run_sweep_tth(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    cfg.validate()?;
    let mut points = Vec::new();
    for protocol in Protocol::ALL {
        for &ef in &cfg.ef_grid {
            for &tth in &cfg.tth_grid {
                points.push((protocol, ef, tth));
            }
        }
    }
    let rows: Vec<Vec<String>> = pool(cfg)?.install(|| {
        points
            .par_iter()
            .map(|&(protocol, ef, tth)| {
                let (status, pdp, tp) = point(cfg, protocol, PolicyKind::Optimal, cfg.rho, ef, tth);
                let success = pdp.map(|p| 1.0 - p);
                vec![protocol.short_name().into(), ef.to_string(), sig(tth), status, opt_sig(success), opt_sig(tp)]
            })
            .collect()
    });
    let mut csv = Csv::new(&SWEEP_TTH_HEADER);
    let n = rows.len();
    rows.into_iter().for_each(|r| csv.row(r));
    Ok(Output { body: csv.into_string(), summary: format!("{n} rows"), code: exit::OK })
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

pub fn verify_options(cfg: &ExperimentConfig) -> VerifyOptions {
    VerifyOptions {
        max_iterations: cfg.imax,
        tolerance: cfg.delta,
        seed: cfg.seed,
        horizon: cfg.horizon,
        replications: cfg.reps,
        ..VerifyOptions::default()
    }
}

/// Runs the acceptance checks. The body is a JSON summary; the summary line
/// lists one verdict per check.
pub fn run_verify(opts: &VerifyOptions) -> Result<Output, CliError> {
    let checks = run_all(opts);
    let passed = all_passed(&checks);
    let summary = checks.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("\n");
    let body = serde_json::to_string_pretty(&VerifySummary { passed, checks }).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    Ok(Output { body, summary, code: if passed { exit::OK } else { exit::VERIFY_FAILED } })
}
