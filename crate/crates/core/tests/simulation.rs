use eharq::chain::analyze_policy;
use eharq::model::{EnergyQuanta, LinkConfig, Protocol};
use eharq::opt::{dinkelbach_solve, myopic_policy};
use eharq::sim::{estimate_with_ci, simulate, SimConfig};

#[test]
fn free_energy_no_feedback_drop_rate() {
    let p = LinkConfig { cost_sample: EnergyQuanta(0), cost_decode: EnergyQuanta(0), ..LinkConfig::reference() }
        .build()
        .unwrap();
    let policy = myopic_policy(Protocol::NoFeedback, &p);
    let est = simulate(&SimConfig { horizon: 1_000_000, seed: 7, params: &p, protocol: Protocol::NoFeedback, policy: &policy })
        .unwrap();
    let expected = 0.013_228_697_347_800_903;
    let sigma = (expected * (1.0 - expected) / est.new_packets as f64).sqrt();
    assert!((est.pdp_hat - expected).abs() <= 3.0 * sigma, "{} vs {expected}", est.pdp_hat);
    assert_eq!(est.new_packets, 250_000);
}

#[test]
fn optimal_randomized_policy_matches_analysis() {
    let p = LinkConfig::reference().build().unwrap();
    let proto = Protocol::AdaptiveFeedback;
    let policy = dinkelbach_solve(&p, proto, 0.2, 20, 1e-6).unwrap().policy.unwrap();
    let analysis = analyze_policy(&policy, &p, proto).unwrap();
    let cfg = SimConfig { horizon: 400_000, seed: 11, params: &p, protocol: proto, policy: &policy };
    let est = estimate_with_ci(&cfg, 8).unwrap();
    assert!((est.pdp_mean - analysis.point.pdp).abs() <= 4.0 * est.pdp_se, "{est:?}");
    assert!((est.throughput_mean - analysis.point.throughput).abs() <= 4.0 * est.throughput_se);
    assert!(analysis.steady.total_variation(&est.state_visit_freq) <= 0.02);
}

#[test]
fn every_protocol_keeps_the_counting_identity() {
    let p = LinkConfig::reference().build().unwrap();
    for proto in Protocol::ALL {
        let policy = myopic_policy(proto, &p);
        for seed in 0..20 {
            let est = simulate(&SimConfig { horizon: 1_000 + seed, seed, params: &p, protocol: proto, policy: &policy })
                .unwrap();
            assert!(est.counting_gap().abs() <= 1, "{proto} seed {seed}");
            assert!((0.0..=1.0).contains(&est.pdp_hat));
            assert!((est.state_visit_freq.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn replications_are_independent_and_reproducible() {
    let p = LinkConfig::reference().build().unwrap();
    let policy = myopic_policy(Protocol::NonAdaptiveFeedback, &p);
    let cfg = SimConfig { horizon: 20_000, seed: 3, params: &p, protocol: Protocol::NonAdaptiveFeedback, policy: &policy };
    let a = estimate_with_ci(&cfg, 4).unwrap();
    assert_eq!(a, estimate_with_ci(&cfg, 4).unwrap());
    assert_eq!(a.replications[0], simulate(&cfg).unwrap());
    assert_ne!(a.replications[0], a.replications[1]);
}
