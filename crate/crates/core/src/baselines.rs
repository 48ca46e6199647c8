//! Reference schedulers and the softmax reuse rule.

use crate::env::Env;
use crate::policy::{action_to_weights, dk_mean, HybridPolicy};
use crate::ssca_trainer::{drop_rate, MetricsRow, ReuseMode, RewardTracker, RunOutput, TrainError, Trainer, TrainerConfig};

/// `exp(ν W_n) / Σ_j exp(ν W_j)` with max subtraction.
pub fn heuristic_reuse_probs(gains: &[f64], nu: f64) -> Vec<f64> {
    let scaled: Vec<f64> = gains.iter().map(|g| (nu * g).clamp(-f64::MAX, f64::MAX)).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Output of a run that does not learn.
#[derive(Debug, Clone)]
pub struct BaselineOutput {
    pub rows: Vec<MetricsRow>,
    pub rewards: Vec<f64>,
}

/// Queue-weighted greedy: `w = dk_mean(s)` every slot, no sampling noise.
///
/// Rows are emitted every `row_every` slots; the `j_tilde` column carries
/// the running average scaled cost.
pub fn run_dk_greedy<F: FnMut(&MetricsRow)>(
    mut env: Env,
    slots: u64,
    row_every: usize,
    ma_window: usize,
    mut sink: F,
) -> Result<BaselineOutput, TrainError> {
    let scale = env.config().offered_load().max(1.0);
    let mut tracker = RewardTracker::new(ma_window);
    let mut rows = Vec::new();
    let mut state = env.state();
    let mut total = 0.0;
    let mut batch_sum = 0.0;
    let mut batch_len = 0;
    let mut iteration = 0;
    for n in 1..=slots {
        let w = action_to_weights(&dk_mean(&state, env.config()));
        let t = env.step(&w)?;
        tracker.push(t.reward);
        total += t.reward;
        batch_sum += t.reward;
        batch_len += 1;
        state = t.next;
        if batch_len == row_every || n == slots {
            iteration += 1;
            let row = MetricsRow {
                iteration,
                slot: env.slot(),
                reward: batch_sum / batch_len as f64,
                ma_reward: tracker.moving_average(),
                drop_rate: drop_rate(&env),
                probs: vec![1.0],
                j_tilde: -total / (n as f64 * scale),
                wall_ms: None,
            };
            sink(&row);
            rows.push(row);
            batch_sum = 0.0;
            batch_len = 0;
        }
    }
    Ok(BaselineOutput {
        rows,
        rewards: tracker.into_trace(),
    })
}

/// Surrogate optimization of the new network alone.
pub fn run_single_policy<F: FnMut(&MetricsRow)>(
    env: Env,
    policy: HybridPolicy,
    config: TrainerConfig,
    seed: u64,
    slots: u64,
    sink: F,
) -> Result<RunOutput, TrainError> {
    let single = HybridPolicy::single(policy.new_policy().clone());
    Trainer::new(config, env, single, seed)?.run(slots, sink)
}

/// Same mixture as the hybrid learner, but the weights are refreshed from
/// an exponential average of each component's reward.
pub fn run_heuristic_reuse<F: FnMut(&MetricsRow)>(
    env: Env,
    policy: HybridPolicy,
    mut config: TrainerConfig,
    seed: u64,
    slots: u64,
    sink: F,
) -> Result<RunOutput, TrainError> {
    if config.reuse == ReuseMode::Ssca {
        config.reuse = ReuseMode::Heuristic { ema: 0.95 };
    }
    Trainer::new(config, env, policy, seed)?.run(slots, sink)
}
