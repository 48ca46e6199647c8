//! Average-cost scheduling MDP: queues, channel evolution, imperfect CSI and
//! the one-slot transition.
//!
//! A [`State`] is observed after the slot's expiries and arrivals, so the
//! agent always sees the packets it is about to schedule. One call to
//! [`Env::step`] serves the current slot and then advances the system to the
//! next observation: evolve channel, expire, arrive.
//!
//! Exogenous randomness (arrivals, fading, estimation noise) comes from
//! dedicated streams, so two runs with the same seed see the same traffic and
//! channels regardless of the actions taken.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mimo_phy::{self, dbm_to_watts, path_loss_amplitude, ChannelMatrix, LinkBudget, PhyError};
use crate::traffic_queue::{
    hlc_et_reward, queue_state_vectors, PoissonSizes, SlotOutcome, UserQueue, BITS_PER_KBIT,
};
use crate::wsr_scheduler::{greedy_wsr, SchedError, ScheduleDecision, WeightVector};

/// Channel features are clamped to this magnitude.
pub const FEATURE_BOUND: f64 = 10.0;

const STREAM_CHANNEL: u64 = 1;
const STREAM_ARRIVALS: u64 = 2;
const STREAM_CSI: u64 = 3;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Sched(#[from] SchedError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserConfig {
    /// Hard deadline in slots.
    pub deadline: usize,
    /// Mean packet size in Kbit.
    pub lambda_kbit: f64,
    pub path_loss_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub antennas: usize,
    /// Per-slot packet arrival probability.
    pub arrival_prob: f64,
    /// Slot duration in seconds; the service budget is `R_i` times this.
    pub slot_seconds: f64,
    /// Reward normalization in slots.
    #[serde(default = "default_tau")]
    pub tau: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    /// Receiver noise variance in watts, same for every user.
    pub noise_variance_w: f64,
    /// RZF regularization; defaults to `0.01 σ² / P_tot`.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// AR(1) coefficient of the small-scale fading, in `[0, 1)`.
    #[serde(default)]
    pub channel_correlation: f64,
    /// Normalized MSE of the channel estimate the scheduler sees.
    #[serde(default)]
    pub csi_nmse: f64,
    #[serde(rename = "user")]
    pub users: Vec<UserConfig>,
}

fn default_tau() -> f64 {
    1.0
}

impl EnvConfig {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn deadlines(&self) -> Vec<usize> {
        self.users.iter().map(|u| u.deadline).collect()
    }

    /// Length of the `Q` / `Q̄` vectors.
    pub fn queue_slots(&self) -> usize {
        self.users.iter().map(|u| u.deadline).sum()
    }

    /// Input length of the policy networks.
    pub fn feature_len(&self) -> usize {
        2 * self.queue_slots() + 2 * self.num_users() * self.antennas
    }

    /// Queue normalization: the largest mean packet size, in bits.
    pub fn q_scale(&self) -> f64 {
        self.users
            .iter()
            .map(|u| u.lambda_kbit * BITS_PER_KBIT as f64)
            .fold(0.0, f64::max)
    }

    /// Mean offered load in bits per slot.
    pub fn offered_load(&self) -> f64 {
        self.users
            .iter()
            .map(|u| self.arrival_prob * u.lambda_kbit * BITS_PER_KBIT as f64)
            .sum()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.users.iter().map(|u| path_loss_amplitude(u.path_loss_db)).collect()
    }

    pub fn link_budget(&self) -> LinkBudget {
        LinkBudget {
            noise_variance: vec![self.noise_variance_w; self.num_users()],
            bandwidth_hz: self.bandwidth_hz,
            total_power_w: dbm_to_watts(self.tx_power_dbm),
            path_loss_db: self.users.iter().map(|u| u.path_loss_db).collect(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
            .unwrap_or_else(|| 0.01 * self.noise_variance_w / dbm_to_watts(self.tx_power_dbm))
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: &str| Err(EnvError::Config(msg.to_string()));
        if self.users.is_empty() {
            return bad("at least one user is required");
        }
        if self.antennas == 0 {
            return bad("antennas must be positive");
        }
        if !(0.0..=1.0).contains(&self.arrival_prob) {
            return bad("arrival_prob must lie in [0, 1]");
        }
        if !(self.slot_seconds > 0.0 && self.tau > 0.0) {
            return bad("slot_seconds and tau must be positive");
        }
        if !(0.0..1.0).contains(&self.channel_correlation) {
            return bad("channel_correlation must lie in [0, 1)");
        }
        if !(self.csi_nmse >= 0.0 && self.csi_nmse.is_finite()) {
            return bad("csi_nmse must be non-negative");
        }
        if let Some(a) = self.alpha {
            if !(a >= 0.0 && a.is_finite()) {
                return bad("alpha must be non-negative");
            }
        }
        for (i, u) in self.users.iter().enumerate() {
            if u.deadline == 0 {
                return Err(EnvError::Config(format!("user[{i}].deadline must be positive")));
            }
            if !(u.lambda_kbit > 0.0 && u.lambda_kbit.is_finite()) {
                return Err(EnvError::Config(format!("user[{i}].lambda_kbit must be positive")));
            }
        }
        self.link_budget().validate(self.num_users())?;
        Ok(())
    }
}

/// Observation at the start of a slot's service.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub slot: u64,
    /// `Q(l)`: remaining bits, user-major, oldest first.
    pub remaining: Vec<u64>,
    /// `Q̄(l)`: original bits in the same layout.
    pub original: Vec<u64>,
    /// True channel `H(l)`.
    pub channel: ChannelMatrix,
    /// Channel estimate the scheduler and the agent see.
    pub csi: ChannelMatrix,
}

/// Exact per-run bit accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BitLedger {
    pub arrived: u64,
    pub delivered_original: u64,
    pub dropped_remaining: u64,
    pub dropped_transmitted: u64,
    pub packets_arrived: u64,
    pub packets_delivered: u64,
    pub packets_dropped: u64,
}

impl BitLedger {
    fn record(&mut self, outcome: &SlotOutcome) {
        for (_, p) in &outcome.arrived {
            self.arrived += p.original_bits;
            self.packets_arrived += 1;
        }
        for d in &outcome.delivered {
            self.delivered_original += d.packet.original_bits;
            self.packets_delivered += 1;
        }
        for e in &outcome.dropped {
            self.dropped_remaining += e.packet.remaining_bits;
            self.dropped_transmitted += e.packet.transmitted_bits();
            self.packets_dropped += 1;
        }
    }
}

#[derive(Debug, Clone)]
pub struct Transition {
    /// `-HLC-ET` of the served slot, bits per slot.
    pub cost: f64,
    pub reward: f64,
    pub decision: ScheduleDecision,
    /// Rates on the true channel with the precoder built from the estimate.
    pub realized_rates: Vec<f64>,
    pub outcome: SlotOutcome,
    pub next: State,
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// I.i.d. Rayleigh channel with row `i` scaled by `amplitudes[i]`.
pub fn draw_channel<R: Rng + ?Sized>(amplitudes: &[f64], antennas: usize, rng: &mut R) -> ChannelMatrix {
    let mut h = ChannelMatrix::zeros(amplitudes.len(), antennas);
    for (i, &a) in amplitudes.iter().enumerate() {
        for z in h.row_mut(i) {
            *z = complex_gaussian(rng, a * a);
        }
    }
    h
}

/// Gauss-Markov step `H' = ρ H + sqrt(1-ρ²) W`, `W` with the same per-user
/// scale as `H`.
pub fn evolve_channel<R: Rng + ?Sized>(
    h: &ChannelMatrix,
    amplitudes: &[f64],
    rho: f64,
    rng: &mut R,
) -> ChannelMatrix {
    let innovation = (1.0 - rho * rho).sqrt();
    let mut next = h.clone();
    for (i, &a) in amplitudes.iter().enumerate() {
        for z in next.row_mut(i) {
            *z = *z * rho + complex_gaussian(rng, a * a) * innovation;
        }
    }
    next
}

/// `Ĥ = H + N`, `N` scaled so that `E‖H-Ĥ‖² / E‖H‖² = nmse`.
pub fn observe_csi<R: Rng + ?Sized>(
    h: &ChannelMatrix,
    amplitudes: &[f64],
    nmse: f64,
    rng: &mut R,
) -> ChannelMatrix {
    if nmse == 0.0 {
        return h.clone();
    }
    let mut est = h.clone();
    for (i, &a) in amplitudes.iter().enumerate() {
        for z in est.row_mut(i) {
            *z += complex_gaussian(rng, nmse * a * a);
        }
    }
    est
}

/// Network input: `Q/q_scale`, `Q̄/q_scale`, then the real and imaginary part
/// of every estimated channel entry divided by its user's path-loss
/// amplitude.
pub fn encode_state(state: &State, config: &EnvConfig) -> Vec<f64> {
    let q_scale = config.q_scale();
    let mut out = Vec::with_capacity(config.feature_len());
    out.extend(state.remaining.iter().map(|&q| q as f64 / q_scale));
    out.extend(state.original.iter().map(|&q| q as f64 / q_scale));
    for (i, a) in config.amplitudes().into_iter().enumerate() {
        for z in state.csi.row(i) {
            out.push((z.re / a).clamp(-FEATURE_BOUND, FEATURE_BOUND));
            out.push((z.im / a).clamp(-FEATURE_BOUND, FEATURE_BOUND));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    link: LinkBudget,
    alpha: f64,
    amplitudes: Vec<f64>,
    sizes: Vec<PoissonSizes>,
    queues: Vec<UserQueue>,
    channel: ChannelMatrix,
    csi: ChannelMatrix,
    slot: u64,
    channel_rng: ChaCha8Rng,
    arrival_rng: ChaCha8Rng,
    csi_rng: ChaCha8Rng,
    ledger: BitLedger,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl Env {
    pub fn new(config: EnvConfig, seed: u64) -> Result<Self, EnvError> {
        config.validate()?;
        let sizes = config
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| {
                PoissonSizes::new(u.lambda_kbit)
                    .ok_or_else(|| EnvError::Config(format!("user[{i}].lambda_kbit is not a valid Poisson mean")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let k = config.num_users();
        let mut env = Self {
            link: config.link_budget(),
            alpha: config.alpha(),
            amplitudes: config.amplitudes(),
            sizes,
            queues: Vec::new(),
            channel: ChannelMatrix::zeros(k, config.antennas),
            csi: ChannelMatrix::zeros(k, config.antennas),
            slot: 0,
            channel_rng: stream(seed, STREAM_CHANNEL),
            arrival_rng: stream(seed, STREAM_ARRIVALS),
            csi_rng: stream(seed, STREAM_CSI),
            ledger: BitLedger::default(),
            config,
        };
        env.reset(seed);
        Ok(env)
    }

    /// Empty queues, fresh channel, slot 0.
    pub fn reset(&mut self, seed: u64) -> State {
        self.channel_rng = stream(seed, STREAM_CHANNEL);
        self.arrival_rng = stream(seed, STREAM_ARRIVALS);
        self.csi_rng = stream(seed, STREAM_CSI);
        self.queues = self
            .config
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| UserQueue::new(i, u.deadline))
            .collect();
        self.slot = 0;
        self.ledger = BitLedger::default();
        self.channel = draw_channel(&self.amplitudes, self.config.antennas, &mut self.channel_rng);
        self.csi = observe_csi(&self.channel, &self.amplitudes, self.config.csi_nmse, &mut self.csi_rng);
        self.state()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn link(&self) -> &LinkBudget {
        &self.link
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn queues(&self) -> &[UserQueue] {
        &self.queues
    }

    pub fn ledger(&self) -> &BitLedger {
        &self.ledger
    }

    /// Original bits of packets still queued (transmitted plus remaining).
    pub fn residual_bits(&self) -> u64 {
        self.queues
            .iter()
            .flat_map(|q| q.packets())
            .map(|p| p.original_bits)
            .sum()
    }

    pub fn state(&self) -> State {
        let (remaining, original) = queue_state_vectors(&self.queues, self.slot);
        State {
            slot: self.slot,
            remaining,
            original,
            channel: self.channel.clone(),
            csi: self.csi.clone(),
        }
    }

    /// Serves the current slot with the schedule chosen for `weights`, then
    /// advances to the next observation.
    pub fn step(&mut self, weights: &WeightVector) -> Result<Transition, EnvError> {
        let k = self.config.num_users();
        let decision = greedy_wsr(&self.csi, weights, &self.link, self.alpha)?;
        let realized_rates = mimo_phy::rates(
            &self.channel,
            &decision.scheduled,
            &decision.precoder,
            &decision.powers,
            &self.link,
        );

        let mut outcome = SlotOutcome {
            budgets: vec![0; k],
            bits_served: vec![0; k],
            ..Default::default()
        };
        for (i, q) in self.queues.iter_mut().enumerate() {
            let budget = (realized_rates[i] * self.config.slot_seconds).floor() as u64;
            outcome.budgets[i] = budget;
            if budget == 0 {
                continue;
            }
            let served = q.serve_fcfs(self.slot, budget);
            outcome.bits_served[i] = served.bits_served;
            outcome.delivered.extend(served.delivered);
        }
        let reward = hlc_et_reward(&outcome, self.config.tau);

        self.slot += 1;
        self.channel = evolve_channel(
            &self.channel,
            &self.amplitudes,
            self.config.channel_correlation,
            &mut self.channel_rng,
        );
        self.csi = observe_csi(&self.channel, &self.amplitudes, self.config.csi_nmse, &mut self.csi_rng);
        for q in &mut self.queues {
            if let Some(dropped) = q.expire(self.slot) {
                outcome.dropped.push(dropped);
            }
        }
        let pa = self.config.arrival_prob;
        for (q, sizes) in self.queues.iter_mut().zip(&self.sizes) {
            if let Some(p) = q.arrive(self.slot, &mut self.arrival_rng, pa, sizes) {
                outcome.arrived.push((q.user(), p));
            }
        }
        self.ledger.record(&outcome);

        Ok(Transition {
            cost: -reward,
            reward,
            decision,
            realized_rates,
            outcome,
            next: self.state(),
        })
    }
}
