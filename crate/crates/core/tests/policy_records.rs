use eharq::model::{Action, LinkConfig, Protocol};
use eharq::opt::{dinkelbach_solve, myopic_policy};
use eharq::policy::{Policy, PolicyRecord};

#[test]
fn json_round_trip_of_optimal_policy() {
    let p = LinkConfig::reference().build().unwrap();
    let proto = Protocol::AdaptiveFeedback;
    let policy = dinkelbach_solve(&p, proto, 0.2, 20, 1e-6).unwrap().policy.unwrap();
    let records = policy.to_records(&p, proto);
    assert_eq!(records.len(), p.state_space().len());
    let json = serde_json::to_string(&records).unwrap();
    let back: Vec<PolicyRecord> = serde_json::from_str(&json).unwrap();
    assert_eq!(Policy::from_records(&back, &p).unwrap(), policy);
}

#[test]
fn records_use_action_codes() {
    let p = LinkConfig::reference().build().unwrap();
    let records = myopic_policy(Protocol::AdaptiveFeedback, &p).to_records(&p, Protocol::AdaptiveFeedback);
    let full = records.iter().find(|r| r.battery == 15 && r.tx_index == 1 && r.rx_state == 0).unwrap();
    let codes: Vec<&str> = full.actions.iter().map(|a| a.action.as_str()).collect();
    assert_eq!(codes, ["00", "10", "11"]);
    let chosen = full.actions.iter().find(|a| a.probability == 1.0).unwrap();
    assert_eq!(Action::from_code(&chosen.action), Some(Action::SAMPLE_ACK));
}

#[test]
fn bad_records_are_rejected() {
    let p = LinkConfig::reference().build().unwrap();
    let mut records = Policy::idle(p.state_space()).to_records(&p, Protocol::NoFeedback);
    records[3].actions[0].action = "2x".into();
    assert!(Policy::from_records(&records, &p).is_err());
    records.pop();
    assert!(Policy::from_records(&records, &p).is_err());
}
