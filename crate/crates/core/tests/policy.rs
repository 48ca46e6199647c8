mod common;

use common::mixture_density;
use hrl_sched::policy::{
    load_policy, save_policy, GaussianPolicy, HybridPolicy, NetworkShape, Observation, PolicyInit,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const K: usize = 3;
const INPUT: usize = 7;

fn shape() -> NetworkShape {
    NetworkShape::new(INPUT, vec![8, 6], K)
}

fn net(seed: u64) -> GaussianPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = PolicyInit {
        mean: 0.5,
        std: 0.6,
        output_gain: 1.0,
    };
    GaussianPolicy::random(shape(), init, &mut rng)
}

fn obs(rng: &mut ChaCha8Rng) -> Observation {
    Observation {
        features: (0..INPUT).map(|_| rng.random_range(-2.0..2.0)).collect(),
        dk_mean: (0..K).map(|_| rng.random_range(0.0..1.5)).collect(),
    }
}

fn hybrid(seed: u64, dk_std: f64) -> HybridPolicy {
    let mut h = HybridPolicy::new(net(seed), vec![net(seed + 1), net(seed + 2)], true, dk_std).unwrap();
    h.set_probs(vec![0.4, 0.25, 0.15, 0.2]).unwrap();
    h
}

#[test]
fn log_prob_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = hybrid(10, 0.3);
    for _ in 0..200 {
        let o = obs(&mut rng);
        let (a, _) = h.sample(&o, &mut rng).unwrap();
        let direct = mixture_density(&h, &o, &a).ln();
        let got = h.log_prob(&o, &a).unwrap();
        assert!((got - direct).abs() <= 1e-10, "{got} vs {direct}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..20 {
        let h = hybrid(100 + 3 * trial, 0.4);
        let o = obs(&mut rng);
        let (a, _) = h.sample(&o, &mut rng).unwrap();
        let g = h.grad_log_prob(&o, &a).unwrap();
        let theta = h.theta();
        let mut probe = h.clone();
        let eps = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..theta.len() {
            let mut t = theta.clone();
            t[i] += eps;
            probe.set_theta_unchecked(&t);
            let up = mixture_density(&probe, &o, &a).ln();
            t[i] -= 2.0 * eps;
            probe.set_theta_unchecked(&t);
            let down = mixture_density(&probe, &o, &a).ln();
            let fd = (up - down) / (2.0 * eps);
            let rel = (g[i] - fd).abs() / fd.abs().max(1e-3);
            worst = worst.max(rel);
        }
        assert!(worst <= 1e-4, "trial {trial}: worst relative error {worst}");
    }
}

#[test]
fn component_frequencies_follow_probs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = hybrid(20, 0.1);
    let o = obs(&mut rng);
    let n = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[h.sample(&o, &mut rng).unwrap().1] += 1;
    }
    for (c, p) in counts.iter().zip(h.probs()) {
        assert!((*c as f64 / n as f64 - p).abs() <= 0.01);
    }
}

#[test]
fn score_has_zero_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = hybrid(30, 0.5);
    let o = obs(&mut rng);
    let n = 100_000;
    let mut acc = vec![0.0; h.theta_len()];
    let mut sq = vec![0.0; h.theta_len()];
    for _ in 0..n {
        let (a, _) = h.sample(&o, &mut rng).unwrap();
        for (i, g) in h.grad_log_prob(&o, &a).unwrap().into_iter().enumerate() {
            acc[i] += g;
            sq[i] += g * g;
        }
    }
    // mixture-weight partials average to one (Σ p_n ∂/∂p_n = 1 pointwise)
    let np = h.num_components();
    for i in 0..h.theta_len() {
        let mean = acc[i] / n as f64;
        let sd = (sq[i] / n as f64 - mean * mean).max(0.0).sqrt();
        let target = if i < np { 1.0 } else { 0.0 };
        assert!((mean - target).abs() <= 5.0 * sd / (n as f64).sqrt() + 1e-9, "coord {i}: {mean}");
    }
}

#[test]
fn exchanging_old_components_is_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut a = HybridPolicy::new(net(1), vec![net(2), net(3)], true, 0.2).unwrap();
    a.set_probs(vec![0.1, 0.5, 0.3, 0.1]).unwrap();
    let mut b = HybridPolicy::new(net(1), vec![net(3), net(2)], true, 0.2).unwrap();
    b.set_probs(vec![0.1, 0.3, 0.5, 0.1]).unwrap();
    for _ in 0..100 {
        let o = obs(&mut rng);
        let act: Vec<f64> = (0..K).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (la, lb) = (a.log_prob(&o, &act).unwrap(), b.log_prob(&o, &act).unwrap());
        assert!((la - lb).abs() <= 1e-12);
        let (ga, gb) = (a.grad_log_prob(&o, &act).unwrap(), b.grad_log_prob(&o, &act).unwrap());
        for (x, y) in ga[4..].iter().zip(&gb[4..]) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }
}

#[test]
fn far_actions_stay_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = hybrid(40, 1e-3);
    let o = obs(&mut rng);
    let a = vec![1e6, -1e6, 1e6];
    assert!(h.log_prob(&o, &a).unwrap().is_finite());
    assert!(h.grad_log_prob(&o, &a).unwrap().iter().all(|g| g.is_finite()));
}

#[test]
fn reloaded_network_is_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let original = net(50);
    let reloaded = load_policy(&save_policy(&original)).unwrap();
    let mut r1 = ChaCha8Rng::seed_from_u64(9);
    let mut r2 = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let o = obs(&mut rng);
        assert_eq!(original.forward(&o.features).unwrap(), reloaded.forward(&o.features).unwrap());
        assert_eq!(original.sample(&o.features, &mut r1).unwrap(), reloaded.sample(&o.features, &mut r2).unwrap());
    }
}
