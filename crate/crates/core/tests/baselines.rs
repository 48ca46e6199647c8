use hrl_sched::harness_cli::{preset, run, Algorithm, RunSpec};
use hrl_sched::ssca_trainer::moving_average_at;

#[test]
fn light_load_rarely_drops() {
    let mut cfg = preset("desk").unwrap();
    cfg.arrival_prob = 0.05;
    for u in &mut cfg.user {
        u.lambda_kbit /= 4.0;
    }
    let out = run(&cfg, &RunSpec::new(Algorithm::DkGreedy, 1, 10_000), |_| {}).unwrap();
    let last = out.rows.last().unwrap();
    assert!(last.drop_rate < 0.01, "drop rate {}", last.drop_rate);
}

#[test]
fn empty_traffic_earns_nothing() {
    let mut cfg = preset("desk").unwrap();
    cfg.arrival_prob = 0.0;
    for alg in [Algorithm::DkGreedy, Algorithm::Hybrid, Algorithm::Single, Algorithm::Heuristic] {
        let out = run(&cfg, &RunSpec::new(alg, 2, 600), |_| {}).unwrap();
        assert!(out.rewards.iter().all(|&r| r == 0.0));
        assert!(out.rows.iter().all(|r| r.drop_rate == 0.0));
    }
}

#[test]
fn one_component_heuristic_equals_single() {
    let mut cfg = preset("desk").unwrap();
    cfg.ablate_dk = true;
    cfg.ablate_old = true;
    let a = run(&cfg, &RunSpec::new(Algorithm::Single, 3, 1500), |_| {}).unwrap();
    let b = run(&cfg, &RunSpec::new(Algorithm::Heuristic, 3, 1500), |_| {}).unwrap();
    assert_eq!(a.rewards, b.rewards);
    assert_eq!(a.rows, b.rows);
}

#[test]
fn greedy_baseline_outperforms_untrained_network() {
    let cfg = preset("desk").unwrap();
    let dk = run(&cfg, &RunSpec::new(Algorithm::DkGreedy, 4, 3000), |_| {}).unwrap();
    let mut frozen = RunSpec::new(Algorithm::Single, 4, 3000);
    frozen.learn = false;
    let net = run(&cfg, &frozen, |_| {}).unwrap();
    assert!(moving_average_at(&dk.rewards, 3000, 3000) > moving_average_at(&net.rewards, 3000, 3000));
}
