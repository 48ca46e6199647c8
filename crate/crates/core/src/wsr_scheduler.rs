//! Greedy weighted-sum-rate user selection with RZF precoding and equal
//! power allocation.
//!
//! Each round tries every unscheduled user, recomputing the precoder and the
//! power split for the enlarged set, and commits the best candidate if it
//! strictly improves the weighted sum rate. Selection stops when no
//! candidate improves or the set reaches the antenna count.

use thiserror::Error;

use crate::mimo_phy::{equal_power, rates, rzf_precoder, ChannelMatrix, LinkBudget, Precoder};

/// Relative margin a candidate must beat the incumbent WSR by.
pub const IMPROVEMENT_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SchedError {
    #[error("weight vector has {got} entries, channel has {users} users")]
    Dimension { got: usize, users: usize },
    #[error("weight {index} is negative or non-finite: {value}")]
    InvalidWeight { index: usize, value: f64 },
    #[error("no user can be scheduled")]
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self, SchedError> {
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(SchedError::InvalidWeight { index, value });
        }
        Ok(Self(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|w| w * c).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Round {
    pub user: usize,
    pub wsr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleDecision {
    /// Scheduled users in commit order; precoder columns follow this order.
    pub scheduled: Vec<usize>,
    pub precoder: Precoder,
    pub powers: Vec<f64>,
    /// Rates predicted on the channel the scheduler was given.
    pub rates: Vec<f64>,
    pub wsr: f64,
    pub rounds: Vec<Round>,
}

struct Evaluation {
    precoder: Precoder,
    powers: Vec<f64>,
    rates: Vec<f64>,
}

fn evaluate(h: &ChannelMatrix, set: &[usize], link: &LinkBudget, alpha: f64) -> Option<Evaluation> {
    let precoder = rzf_precoder(&h.select(set), alpha).ok()?;
    let powers = equal_power(link.total_power_w, h.users(), set);
    let rates = rates(h, set, &precoder, &powers, link);
    Some(Evaluation {
        precoder,
        powers,
        rates,
    })
}

fn weighted(rates: &[f64], w: &[f64], set: &[usize]) -> f64 {
    set.iter().map(|&i| w[i] * rates[i]).sum()
}

pub fn greedy_wsr(
    h: &ChannelMatrix,
    w: &WeightVector,
    link: &LinkBudget,
    alpha: f64,
) -> Result<ScheduleDecision, SchedError> {
    let k = h.users();
    if w.len() != k {
        return Err(SchedError::Dimension { got: w.len(), users: k });
    }
    let weights = w.as_slice();
    if weights.iter().all(|&x| x <= 0.0) {
        return best_single_user(h, link, alpha);
    }

    let mut scheduled: Vec<usize> = Vec::new();
    let mut incumbent: f64 = 0.0;
    let mut best_eval: Option<Evaluation> = None;
    let mut rounds = Vec::new();
    while scheduled.len() < h.antennas() {
        let mut round_best: Option<(usize, f64, Evaluation)> = None;
        for u in (0..k).filter(|u| !scheduled.contains(u)) {
            let mut set = scheduled.clone();
            set.push(u);
            let Some(eval) = evaluate(h, &set, link, alpha) else {
                continue;
            };
            let value = weighted(&eval.rates, weights, &set);
            if round_best.as_ref().is_none_or(|(_, v, _)| value > *v) {
                round_best = Some((u, value, eval));
            }
        }
        match round_best {
            Some((u, value, eval)) if value > incumbent + IMPROVEMENT_TOL * incumbent.abs() => {
                scheduled.push(u);
                incumbent = value;
                best_eval = Some(eval);
                rounds.push(Round { user: u, wsr: value });
            }
            _ => break,
        }
    }
    let Some(eval) = best_eval else {
        return best_single_user(h, link, alpha);
    };
    Ok(ScheduleDecision {
        scheduled,
        precoder: eval.precoder,
        powers: eval.powers,
        rates: eval.rates,
        wsr: incumbent,
        rounds,
    })
}

/// Fallback when no weight is positive: the user with the highest
/// single-user rate.
fn best_single_user(h: &ChannelMatrix, link: &LinkBudget, alpha: f64) -> Result<ScheduleDecision, SchedError> {
    let mut best: Option<(usize, Evaluation)> = None;
    for u in 0..h.users() {
        let Some(eval) = evaluate(h, &[u], link, alpha) else {
            continue;
        };
        if best.as_ref().is_none_or(|(b, e)| eval.rates[u] > e.rates[*b]) {
            best = Some((u, eval));
        }
    }
    let (u, eval) = best.ok_or(SchedError::Infeasible)?;
    Ok(ScheduleDecision {
        scheduled: vec![u],
        precoder: eval.precoder,
        powers: eval.powers,
        rates: eval.rates,
        wsr: 0.0,
        rounds: vec![Round { user: u, wsr: 0.0 }],
    })
}

/// `Σ_{i∈B} w_i R_i` recomputed from a decision.
pub fn wsr_value(decision: &ScheduleDecision, w: &WeightVector) -> f64 {
    weighted(&decision.rates, w.as_slice(), &decision.scheduled)
}
