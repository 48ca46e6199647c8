//! Hybrid mixture policy over a trainable network, frozen reloaded networks
//! and the queue-weighted domain-knowledge rule.
//!
//! The trainable parameter vector is `θ = [p; γ₀]`: the mixture weights
//! followed by the flat parameters of the new network. Frozen components
//! contribute to the density but never to the gradient of `γ₀`.

mod file;
mod network;

pub use file::{load_policy, read_policy_file, save_policy, write_policy_file, POLICY_FORMAT_VERSION};
pub use network::{
    gaussian_log_density, sample_gaussian, GaussianOutput, GaussianPolicy, NetworkShape, PolicyInit,
    LOG_STD_MAX, LOG_STD_MIN,
};

use rand::Rng;
use thiserror::Error;

use crate::env::{EnvConfig, State};
use crate::wsr_scheduler::WeightVector;

/// Weights below this are floored; greedy selection is invariant to positive
/// scaling so only the ordering of the positive part matters.
pub const WEIGHT_FLOOR: f64 = 1e-9;

/// Lower bound returned by [`HybridPolicy::log_prob`] when every component
/// underflows.
pub const LOG_PROB_FLOOR: f64 = -745.0;

/// Default spread of the Gaussian wrapped around the deterministic rule.
pub const DEFAULT_DK_STD: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("{what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("mixture weights are not a probability vector: {0:?}")]
    NotSimplex(Vec<f64>),
    #[error("reloaded policy shape does not match the new policy")]
    ShapeMismatch,
    #[error("policy file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentKind {
    New,
    Old(usize),
    DomainKnowledge,
}

/// What the policies condition on: network features and the rule's mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub features: Vec<f64>,
    pub dk_mean: Vec<f64>,
}

impl Observation {
    pub fn from_state(state: &State, config: &EnvConfig) -> Self {
        Self {
            features: crate::env::encode_state(state, config),
            dk_mean: dk_mean(state, config),
        }
    }
}

/// Queue-weighted rule: total queued bits of each user over `q_scale`.
pub fn dk_mean(state: &State, config: &EnvConfig) -> Vec<f64> {
    let q_scale = config.q_scale();
    let mut offset = 0;
    config
        .users
        .iter()
        .map(|u| {
            let total: u64 = state.remaining[offset..offset + u.deadline].iter().sum();
            offset += u.deadline;
            total as f64 / q_scale
        })
        .collect()
}

pub fn action_to_weights(action: &[f64]) -> WeightVector {
    let w = action
        .iter()
        .map(|&a| if a > WEIGHT_FLOOR { a } else { WEIGHT_FLOOR })
        .collect();
    WeightVector::new(w).expect("floored weights are finite and positive")
}

pub fn is_simplex(p: &[f64], tol: f64) -> bool {
    !p.is_empty()
        && p.iter().all(|&x| x >= -tol && x <= 1.0 + tol)
        && (p.iter().sum::<f64>() - 1.0).abs() <= tol
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridPolicy {
    kinds: Vec<ComponentKind>,
    probs: Vec<f64>,
    new: GaussianPolicy,
    old: Vec<GaussianPolicy>,
    dk_std: f64,
}

impl HybridPolicy {
    /// Components are ordered `[new, old_1.., dk]`; mixture weights start
    /// uniform.
    pub fn new(
        new: GaussianPolicy,
        old: Vec<GaussianPolicy>,
        include_dk: bool,
        dk_std: f64,
    ) -> Result<Self, PolicyError> {
        if old.iter().any(|o| o.shape() != new.shape()) {
            return Err(PolicyError::ShapeMismatch);
        }
        let mut kinds = vec![ComponentKind::New];
        kinds.extend((0..old.len()).map(ComponentKind::Old));
        if include_dk {
            kinds.push(ComponentKind::DomainKnowledge);
        }
        let n = kinds.len();
        Ok(Self {
            kinds,
            probs: vec![1.0 / n as f64; n],
            new,
            old,
            dk_std,
        })
    }

    pub fn single(new: GaussianPolicy) -> Self {
        Self::new(new, Vec::new(), false, DEFAULT_DK_STD).expect("no reloaded components")
    }

    pub fn kinds(&self) -> &[ComponentKind] {
        &self.kinds
    }

    pub fn num_components(&self) -> usize {
        self.kinds.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn set_probs(&mut self, probs: Vec<f64>) -> Result<(), PolicyError> {
        if probs.len() != self.kinds.len() || !is_simplex(&probs, 1e-9) {
            return Err(PolicyError::NotSimplex(probs));
        }
        self.probs = probs;
        Ok(())
    }

    pub fn new_policy(&self) -> &GaussianPolicy {
        &self.new
    }

    pub fn old_policies(&self) -> &[GaussianPolicy] {
        &self.old
    }

    pub fn dk_std(&self) -> f64 {
        self.dk_std
    }

    pub fn actions(&self) -> usize {
        self.new.actions()
    }

    pub fn theta_len(&self) -> usize {
        self.probs.len() + self.new.params().len()
    }

    pub fn theta(&self) -> Vec<f64> {
        let mut theta = self.probs.clone();
        theta.extend_from_slice(self.new.params());
        theta
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<(), PolicyError> {
        if theta.len() != self.theta_len() {
            return Err(PolicyError::Dimension {
                what: "theta",
                expected: self.theta_len(),
                got: theta.len(),
            });
        }
        let n = self.probs.len();
        self.set_probs(theta[..n].to_vec())?;
        self.new.params_mut().copy_from_slice(&theta[n..]);
        Ok(())
    }

    /// Sets `θ` without the simplex check; finite-difference probes step off
    /// the simplex.
    pub fn set_theta_unchecked(&mut self, theta: &[f64]) {
        let n = self.probs.len();
        self.probs.copy_from_slice(&theta[..n]);
        self.new.params_mut().copy_from_slice(&theta[n..]);
    }

    fn component_output(&self, kind: ComponentKind, obs: &Observation) -> Result<GaussianOutput, PolicyError> {
        match kind {
            ComponentKind::New => self.new.forward(&obs.features),
            ComponentKind::Old(j) => self.old[j].forward(&obs.features),
            ComponentKind::DomainKnowledge => {
                if obs.dk_mean.len() != self.actions() {
                    return Err(PolicyError::Dimension {
                        what: "rule mean",
                        expected: self.actions(),
                        got: obs.dk_mean.len(),
                    });
                }
                Ok(GaussianOutput {
                    mean: obs.dk_mean.clone(),
                    log_std: vec![self.dk_std.ln(); self.actions()],
                })
            }
        }
    }

    /// `log π_n(a|s)` for every component.
    pub fn component_log_densities(&self, obs: &Observation, action: &[f64]) -> Result<Vec<f64>, PolicyError> {
        if action.len() != self.actions() {
            return Err(PolicyError::Dimension {
                what: "action",
                expected: self.actions(),
                got: action.len(),
            });
        }
        self.kinds
            .iter()
            .map(|&kind| {
                let out = self.component_output(kind, obs)?;
                Ok(gaussian_log_density(action, &out.mean, &out.log_std))
            })
            .collect()
    }

    fn mixture_log(&self, logs: &[f64]) -> f64 {
        let terms = self
            .probs
            .iter()
            .zip(logs)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, l)| p.ln() + l);
        log_sum_exp(terms).max(LOG_PROB_FLOOR)
    }

    /// `log Σ_n p_n π_n(a|s)`, floored at [`LOG_PROB_FLOOR`].
    pub fn log_prob(&self, obs: &Observation, action: &[f64]) -> Result<f64, PolicyError> {
        let logs = self.component_log_densities(obs, action)?;
        Ok(self.mixture_log(&logs))
    }

    /// `∇_θ log π_θ(a|s)`: `π_n / π_θ` for each mixture weight, then the
    /// new component's responsibility times its own score.
    pub fn grad_log_prob(&self, obs: &Observation, action: &[f64]) -> Result<Vec<f64>, PolicyError> {
        let logs = self.component_log_densities(obs, action)?;
        let total = self.mixture_log(&logs);
        let n = self.probs.len();
        let mut grad = Vec::with_capacity(self.theta_len());
        grad.extend(logs.iter().map(|l| (l - total).min(700.0).exp()));
        let new_idx = self
            .kinds
            .iter()
            .position(|k| *k == ComponentKind::New)
            .expect("new component always present");
        let responsibility = self.probs[new_idx] * grad[new_idx];
        if responsibility > 0.0 {
            let (_, score) = self.new.score(&obs.features, action)?;
            grad.extend(score.into_iter().map(|g| responsibility * g));
        } else {
            grad.resize(n + self.new.params().len(), 0.0);
        }
        Ok(grad)
    }

    /// Draws a component from `p`, then an action from it.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &Observation, rng: &mut R) -> Result<(Vec<f64>, usize), PolicyError> {
        let m = sample_index(&self.probs, rng);
        Ok((self.sample_component(m, obs, rng)?, m))
    }

    pub fn sample_component<R: Rng + ?Sized>(
        &self,
        m: usize,
        obs: &Observation,
        rng: &mut R,
    ) -> Result<Vec<f64>, PolicyError> {
        let out = self.component_output(self.kinds[m], obs)?;
        Ok(sample_gaussian(&out.mean, &out.log_std, rng))
    }
}

/// Categorical draw; mass lost to rounding falls on the last positive entry.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}
