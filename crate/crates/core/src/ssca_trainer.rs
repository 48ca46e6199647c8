//! Stochastic successive convex approximation for the hybrid policy.
//!
//! Each iteration collects a batch of slots under the current policy, keeps
//! the latest `2L` of them, forms sample-average estimates of the average
//! cost and its gradient, smooths them recursively and moves `θ` towards the
//! minimizer of a quadratic surrogate.

use std::collections::VecDeque;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::baselines::heuristic_reuse_probs;
use crate::env::{Env, EnvError};
use crate::policy::{action_to_weights, HybridPolicy, Observation, PolicyError};

const STREAM_ACTIONS: u64 = 4;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("invalid trainer config: {0}")]
    Config(String),
    #[error("estimates diverged at iteration {iteration} (slot {slot}): J = {j_tilde}")]
    Diverged { iteration: usize, slot: u64, j_tilde: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub obs: Observation,
    pub action: Vec<f64>,
    pub component: usize,
    /// Scaled cost of the slot.
    pub cost: f64,
}

/// The latest `2L` experiences, oldest first.
#[derive(Debug, Clone)]
pub struct ExperienceBuffer {
    horizon: usize,
    items: VecDeque<Experience>,
}

impl ExperienceBuffer {
    pub fn new(horizon: usize) -> Self {
        assert!(horizon > 0, "horizon must be positive");
        Self {
            horizon,
            items: VecDeque::with_capacity(2 * horizon),
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn capacity(&self) -> usize {
        2 * self.horizon
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.items.len() == self.capacity()
    }

    pub fn push(&mut self, e: Experience) {
        if self.is_full() {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn get(&self, i: usize) -> &Experience {
        &self.items[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.items.iter().map(|e| e.cost).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JBarMode {
    /// Mean over the `2L` stored costs.
    #[default]
    Mean,
    /// Sum over the `2L` stored costs divided by `L`.
    HalfWindow,
}

pub fn estimate_j_bar(costs: &[f64], horizon: usize, mode: JBarMode) -> f64 {
    let sum: f64 = costs.iter().sum();
    match mode {
        JBarMode::Mean => sum / costs.len() as f64,
        JBarMode::HalfWindow => sum / horizon as f64,
    }
}

/// Centered `L`-step return starting at buffer index `r` (0-based, `r < L`).
pub fn estimate_q(costs: &[f64], r: usize, horizon: usize, j_bar: f64) -> f64 {
    costs[r..r + horizon].iter().map(|c| c - j_bar).sum()
}

/// `(1/L) Σ_r Q̃_r ∇log π_θ(a_r|s_r)` over the older half of the buffer.
pub fn estimate_g_bar(buffer: &ExperienceBuffer, policy: &HybridPolicy, j_bar: f64) -> Result<Vec<f64>, PolicyError> {
    let l = buffer.horizon();
    let costs = buffer.costs();
    let mut g = vec![0.0; policy.theta_len()];
    for r in 0..l {
        let q = estimate_q(&costs, r, l, j_bar);
        if q == 0.0 {
            continue;
        }
        let e = buffer.get(r);
        let score = policy.grad_log_prob(&e.obs, &e.action)?;
        for (gi, si) in g.iter_mut().zip(score) {
            *gi += q * si;
        }
    }
    for gi in &mut g {
        *gi /= l as f64;
    }
    Ok(g)
}

/// Recursive averaging `x ← χ x̄ + (1-χ) x` applied to both estimates.
pub fn smooth(j_prev: f64, g_prev: &[f64], j_bar: f64, g_bar: &[f64], chi: f64) -> (f64, Vec<f64>) {
    let j = chi * j_bar + (1.0 - chi) * j_prev;
    let g = g_prev
        .iter()
        .zip(g_bar)
        .map(|(p, b)| chi * b + (1.0 - chi) * p)
        .collect();
    (j, g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub kappa1: f64,
    pub kappa2: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        Self {
            kappa1: 0.6,
            kappa2: 0.7,
        }
    }
}

impl StepSizes {
    pub fn new(kappa1: f64, kappa2: f64) -> Result<Self, TrainError> {
        let s = Self { kappa1, kappa2 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let ok = self.kappa1 > 0.5 && self.kappa1 < 1.0 && self.kappa2 > 0.5 && self.kappa2 <= 1.0;
        if !ok || self.kappa1 >= self.kappa2 {
            return Err(TrainError::Config(format!(
                "step exponents need 0.5 < kappa1 < kappa2 <= 1 and kappa1 < 1, got ({}, {})",
                self.kappa1, self.kappa2
            )));
        }
        Ok(())
    }

    /// `(χ_l, η_l)` for `l ≥ 1`.
    pub fn at(&self, l: usize) -> (f64, f64) {
        let l = l as f64;
        (l.powf(-self.kappa1), l.powf(-self.kappa2))
    }
}

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn project_simplex(x: &[f64]) -> Vec<f64> {
    let mut u = x.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    let mut p: Vec<f64> = x.iter().map(|&xi| (xi - theta).max(0.0)).collect();
    renormalize(&mut p);
    p
}

fn renormalize(p: &mut [f64]) {
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        for v in p.iter_mut() {
            *v = (*v / s).min(1.0);
        }
    }
}

/// `J̃ + g̃ᵀ(θ-θˡ) + ς‖θ-θˡ‖²`.
pub fn surrogate_value(theta: &[f64], theta_l: &[f64], j_tilde: f64, g_tilde: &[f64], varsigma: f64) -> f64 {
    let mut v = j_tilde;
    for ((t, tl), g) in theta.iter().zip(theta_l).zip(g_tilde) {
        let d = t - tl;
        v += g * d + varsigma * d * d;
    }
    v
}

/// Minimizer of the surrogate over the simplex (first `n_probs` coordinates)
/// times the parameter box.
pub fn solve_surrogate(theta_l: &[f64], g_tilde: &[f64], varsigma: f64, n_probs: usize, param_box: f64) -> Vec<f64> {
    let shifted: Vec<f64> = theta_l
        .iter()
        .zip(g_tilde)
        .map(|(t, g)| t - g / (2.0 * varsigma))
        .collect();
    let mut out = project_simplex(&shifted[..n_probs]);
    out.extend(shifted[n_probs..].iter().map(|v| v.clamp(-param_box, param_box)));
    out
}

/// `(1-η) θˡ + η θ_c`, with the mixture part renormalized.
pub fn update_theta(theta_l: &[f64], theta_c: &[f64], eta: f64, n_probs: usize) -> Vec<f64> {
    let mut out: Vec<f64> = theta_l
        .iter()
        .zip(theta_c)
        .map(|(a, c)| (1.0 - eta) * a + eta * c)
        .collect();
    let p = project_simplex(&out[..n_probs]);
    out[..n_probs].copy_from_slice(&p);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReuseMode {
    /// Mixture weights follow the surrogate updates.
    Ssca,
    /// Mixture weights are a softmax of per-component reward averages with
    /// the given EMA factor.
    Heuristic { ema: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub horizon: usize,
    pub batch: usize,
    pub varsigma: f64,
    pub steps: StepSizes,
    /// Softmax temperature for the initial mixture weights.
    pub nu: f64,
    /// Slots spent on each component before the first iteration.
    pub warmup_slots: usize,
    pub param_box: f64,
    pub j_bar_mode: JBarMode,
    pub freeze_probs: bool,
    /// When false, `θ` is never updated (frozen evaluation).
    pub learn: bool,
    pub reuse: ReuseMode,
    pub ma_window: usize,
    /// Costs are divided by this; `None` uses the offered load.
    pub cost_scale: Option<f64>,
    pub timing: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            horizon: 32,
            batch: 8,
            varsigma: 1.0,
            steps: StepSizes::default(),
            nu: 5.0,
            warmup_slots: 200,
            param_box: 10.0,
            j_bar_mode: JBarMode::Mean,
            freeze_probs: false,
            learn: true,
            reuse: ReuseMode::Ssca,
            ma_window: 500,
            cost_scale: None,
            timing: false,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.steps.validate()?;
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.horizon == 0 || self.batch == 0 || self.ma_window == 0 {
            return bad("horizon, batch and ma_window must be positive");
        }
        if !(self.varsigma > 0.0 && self.varsigma.is_finite()) {
            return bad("varsigma must be positive");
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return bad("nu must be positive");
        }
        if self.param_box.is_nan() || self.param_box <= 0.0 {
            return bad("param_box must be positive");
        }
        if let ReuseMode::Heuristic { ema } = self.reuse {
            if !(0.0..1.0).contains(&ema) {
                return bad("heuristic ema must lie in [0, 1)");
            }
        }
        if let Some(s) = self.cost_scale {
            if !(s > 0.0 && s.is_finite()) {
                return bad("cost_scale must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    /// Slots simulated so far.
    pub slot: u64,
    /// Mean reward of the iteration's batch, bits per slot.
    pub reward: f64,
    pub ma_reward: f64,
    /// Dropped packets over finished packets so far.
    pub drop_rate: f64,
    pub probs: Vec<f64>,
    pub j_tilde: f64,
    pub wall_ms: Option<f64>,
}

/// Per-slot reward trace with a trailing moving average.
#[derive(Debug, Clone)]
pub struct RewardTracker {
    window: usize,
    trace: Vec<f64>,
    sum: f64,
}

impl RewardTracker {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            trace: Vec::new(),
            sum: 0.0,
        }
    }

    pub fn push(&mut self, r: f64) {
        self.trace.push(r);
        self.sum += r;
        if self.trace.len() > self.window {
            self.sum -= self.trace[self.trace.len() - 1 - self.window];
        }
    }

    pub fn moving_average(&self) -> f64 {
        let n = self.trace.len().min(self.window);
        if n == 0 {
            0.0
        } else {
            self.sum / n as f64
        }
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<f64> {
        self.trace
    }
}

/// Average of the `window` rewards ending at slot `end` (exclusive).
pub fn moving_average_at(trace: &[f64], end: usize, window: usize) -> f64 {
    let end = end.min(trace.len());
    let start = end.saturating_sub(window);
    if end == start {
        return 0.0;
    }
    trace[start..end].iter().sum::<f64>() / (end - start) as f64
}

pub fn drop_rate(env: &Env) -> f64 {
    let l = env.ledger();
    let finished = l.packets_delivered + l.packets_dropped;
    if finished == 0 {
        0.0
    } else {
        l.packets_dropped as f64 / finished as f64
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<MetricsRow>,
    pub rewards: Vec<f64>,
    pub policy: HybridPolicy,
}

pub struct Trainer {
    config: TrainerConfig,
    env: Env,
    policy: HybridPolicy,
    rng: ChaCha8Rng,
    buffer: ExperienceBuffer,
    cost_scale: f64,
    tracker: RewardTracker,
    iteration: usize,
    j_tilde: f64,
    g_tilde: Vec<f64>,
    gains: Vec<f64>,
    obs: Observation,
}

impl Trainer {
    pub fn new(config: TrainerConfig, env: Env, policy: HybridPolicy, seed: u64) -> Result<Self, TrainError> {
        config.validate()?;
        let cost_scale = config.cost_scale.unwrap_or_else(|| env.config().offered_load().max(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(STREAM_ACTIONS);
        let obs = Observation::from_state(&env.state(), env.config());
        Ok(Self {
            buffer: ExperienceBuffer::new(config.horizon),
            tracker: RewardTracker::new(config.ma_window),
            g_tilde: vec![0.0; policy.theta_len()],
            gains: vec![0.0; policy.num_components()],
            config,
            env,
            policy,
            rng,
            cost_scale,
            iteration: 0,
            j_tilde: 0.0,
            obs,
        })
    }

    pub fn policy(&self) -> &HybridPolicy {
        &self.policy
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn rewards(&self) -> &[f64] {
        self.tracker.trace()
    }

    /// One slot under component `forced`, or a mixture draw when `None`.
    fn act(&mut self, forced: Option<usize>) -> Result<Experience, TrainError> {
        let (action, component) = match forced {
            Some(m) => (self.policy.sample_component(m, &self.obs, &mut self.rng)?, m),
            None => self.policy.sample(&self.obs, &mut self.rng)?,
        };
        let t = self.env.step(&action_to_weights(&action))?;
        self.tracker.push(t.reward);
        let next = Observation::from_state(&t.next, self.env.config());
        let obs = std::mem::replace(&mut self.obs, next);
        Ok(Experience {
            obs,
            action,
            component,
            cost: t.cost / self.cost_scale,
        })
    }

    fn remaining(&self, total: u64) -> u64 {
        total.saturating_sub(self.env.slot())
    }

    /// Tries every component for the warm-up window and sets the mixture
    /// weights to a softmax of their average scaled rewards.
    fn warm_up(&mut self, total: u64) -> Result<(), TrainError> {
        let n = self.policy.num_components();
        if self.config.freeze_probs || n == 1 || self.config.warmup_slots == 0 {
            return Ok(());
        }
        let mut avg = vec![0.0; n];
        for (m, slot_avg) in avg.iter_mut().enumerate() {
            let mut sum = 0.0;
            let mut count = 0;
            while count < self.config.warmup_slots && self.remaining(total) > 0 {
                let e = self.act(Some(m))?;
                sum -= e.cost;
                count += 1;
                self.buffer.push(e);
            }
            if count > 0 {
                *slot_avg = sum / count as f64;
            }
        }
        self.gains = avg.clone();
        self.policy.set_probs(heuristic_reuse_probs(&avg, self.config.nu))?;
        Ok(())
    }

    fn update(&mut self) -> Result<(), TrainError> {
        self.iteration += 1;
        if !self.config.learn {
            self.j_tilde = estimate_j_bar(&self.buffer.costs(), self.config.horizon, self.config.j_bar_mode);
            return Ok(());
        }
        let l = self.iteration;
        let costs = self.buffer.costs();
        let j_bar = estimate_j_bar(&costs, self.config.horizon, self.config.j_bar_mode);
        let g_bar = estimate_g_bar(&self.buffer, &self.policy, j_bar)?;
        let (chi, eta) = self.config.steps.at(l);
        let (j, g) = if l == 1 {
            (j_bar, g_bar)
        } else {
            smooth(self.j_tilde, &self.g_tilde, j_bar, &g_bar, chi)
        };
        if !j.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Err(TrainError::Diverged {
                iteration: l,
                slot: self.env.slot(),
                j_tilde: j,
            });
        }
        self.j_tilde = j;
        self.g_tilde = g;

        let n = self.policy.num_components();
        let theta = self.policy.theta();
        let theta_c = solve_surrogate(&theta, &self.g_tilde, self.config.varsigma, n, self.config.param_box);
        let mut next = update_theta(&theta, &theta_c, eta, n);
        let learn_probs = !self.config.freeze_probs && self.config.reuse == ReuseMode::Ssca;
        if !learn_probs {
            next[..n].copy_from_slice(self.policy.probs());
        }
        if let ReuseMode::Heuristic { .. } = self.config.reuse {
            if !self.config.freeze_probs {
                next[..n].copy_from_slice(&heuristic_reuse_probs(&self.gains, self.config.nu));
            }
        }
        self.policy.set_theta(&next)?;
        Ok(())
    }

    /// Runs until `total_slots` slots have been simulated, passing each
    /// iteration's metrics to `sink`.
    pub fn run<F: FnMut(&MetricsRow)>(mut self, total_slots: u64, mut sink: F) -> Result<RunOutput, TrainError> {
        let start = Instant::now();
        let mut rows = Vec::new();
        self.warm_up(total_slots)?;
        while !self.buffer.is_full() && self.remaining(total_slots) > 0 {
            let e = self.act(None)?;
            self.buffer.push(e);
        }
        while self.remaining(total_slots) > 0 {
            let batch = (self.config.batch as u64).min(self.remaining(total_slots)) as usize;
            let mut reward_sum = 0.0;
            for _ in 0..batch {
                let e = self.act(None)?;
                reward_sum -= e.cost;
                if let ReuseMode::Heuristic { ema } = self.config.reuse {
                    let g = &mut self.gains[e.component];
                    *g = ema * *g + (1.0 - ema) * (-e.cost);
                }
                self.buffer.push(e);
            }
            self.update()?;
            let row = MetricsRow {
                iteration: self.iteration,
                slot: self.env.slot(),
                reward: reward_sum * self.cost_scale / batch as f64,
                ma_reward: self.tracker.moving_average(),
                drop_rate: drop_rate(&self.env),
                probs: self.policy.probs().to_vec(),
                j_tilde: self.j_tilde,
                wall_ms: self.config.timing.then(|| start.elapsed().as_secs_f64() * 1e3),
            };
            sink(&row);
            rows.push(row);
        }
        Ok(RunOutput {
            rows,
            rewards: self.tracker.into_trace(),
            policy: self.policy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{GaussianPolicy, NetworkShape};

    fn exp(cost: f64) -> Experience {
        Experience {
            obs: Observation {
                features: vec![0.0; 3],
                dk_mean: vec![0.0; 2],
            },
            action: vec![0.1, 0.2],
            component: 0,
            cost,
        }
    }

    #[test]
    fn buffer_keeps_latest() {
        let mut b = ExperienceBuffer::new(2);
        for c in 0..7 {
            b.push(exp(c as f64));
        }
        assert!(b.is_full());
        assert_eq!(b.costs(), vec![3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn j_bar_modes() {
        let c = [-1.0, -2.0, -3.0, -4.0];
        assert_eq!(estimate_j_bar(&c, 2, JBarMode::Mean), -2.5);
        assert_eq!(estimate_j_bar(&c, 2, JBarMode::HalfWindow), -5.0);
        assert_eq!(estimate_j_bar(&[-3.0; 6], 3, JBarMode::Mean), -3.0);
    }

    #[test]
    fn q_of_constant_costs_is_zero() {
        let c = [0.7; 8];
        for r in 0..4 {
            assert_eq!(estimate_q(&c, r, 4, 0.7), 0.0);
        }
        assert_eq!(estimate_q(&[2.0, 5.0], 0, 1, 1.0), 1.0);
    }

    #[test]
    fn smoothing_limits() {
        let (j, g) = smooth(1.0, &[1.0, 2.0], 3.0, &[5.0, 6.0], 1.0);
        assert_eq!((j, g), (3.0, vec![5.0, 6.0]));
        let (j, g) = smooth(1.0, &[1.0, 2.0], 3.0, &[5.0, 6.0], 0.0);
        assert_eq!((j, g), (1.0, vec![1.0, 2.0]));
        let (j, g) = smooth(1.0, &[1.0, 2.0], 3.0, &[5.0, 6.0], 0.5);
        assert_eq!((j, g), (2.0, vec![3.0, 4.0]));
    }

    #[test]
    fn step_sizes() {
        let s = StepSizes::default();
        assert_eq!(s.at(1), (1.0, 1.0));
        let (c, e) = s.at(1024);
        assert!((c - 1024f64.powf(-0.6)).abs() < 1e-15);
        assert!((e - 1024f64.powf(-0.7)).abs() < 1e-15);
        assert!(StepSizes::new(0.7, 0.6).is_err());
        assert!(StepSizes::new(0.5, 0.7).is_err());
        assert!(StepSizes::new(0.6, 1.0).is_ok());
    }

    #[test]
    fn simplex_projection_cases() {
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.2, 0.3, 0.5]);
        assert!(p.iter().zip([0.2, 0.3, 0.5]).all(|(a, b)| (a - b).abs() < 1e-15));
        assert_eq!(project_simplex(&[0.5, 0.5, -3.0]), vec![0.5, 0.5, 0.0]);
        assert_eq!(project_simplex(&[7.0]), vec![1.0]);
    }

    #[test]
    fn surrogate_stationary_and_interior() {
        let theta = [0.3, 0.7, 1.0, -2.0];
        assert_eq!(solve_surrogate(&theta, &[0.0; 4], 1.0, 2, 10.0), theta.to_vec());
        let g = [0.2, -0.2, 4.0, -1.0];
        let c = solve_surrogate(&theta, &g, 2.0, 2, 10.0);
        let expect = [0.25, 0.75, 0.0, -1.75];
        assert!(c.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-12));
        let clamp = solve_surrogate(&theta, &[0.0, 0.0, -100.0, 100.0], 1.0, 2, 10.0);
        assert_eq!(&clamp[2..], &[10.0, -10.0]);
    }

    #[test]
    fn update_endpoints() {
        let a = [0.4, 0.6, 3.0];
        let c = [1.0, 0.0, -1.0];
        assert_eq!(update_theta(&a, &c, 0.0, 2), a.to_vec());
        assert_eq!(update_theta(&a, &c, 1.0, 2), c.to_vec());
    }

    #[test]
    fn identical_components_have_equal_prob_gradients() {
        let net = GaussianPolicy::zeros(NetworkShape::new(3, vec![4], 2));
        let policy = HybridPolicy::new(net.clone(), vec![net.clone(), net], false, 0.05).unwrap();
        let mut b = ExperienceBuffer::new(3);
        for i in 0..6 {
            let mut e = exp(-(i as f64) * 0.3);
            e.action = vec![0.1 * i as f64, -0.2];
            b.push(e);
        }
        let j = estimate_j_bar(&b.costs(), 3, JBarMode::Mean);
        let g = estimate_g_bar(&b, &policy, j).unwrap();
        assert!((g[0] - g[1]).abs() < 1e-12 && (g[1] - g[2]).abs() < 1e-12);
    }

    #[test]
    fn moving_average_window() {
        let mut t = RewardTracker::new(3);
        assert_eq!(t.moving_average(), 0.0);
        for r in [1.0, 2.0, 3.0, 4.0, 5.0] {
            t.push(r);
        }
        assert_eq!(t.moving_average(), 4.0);
        assert_eq!(moving_average_at(t.trace(), 2, 3), 1.5);
        assert_eq!(moving_average_at(t.trace(), 5, 3), 4.0);
    }
}
