//! Scenario files, presets, run orchestration and the metrics CSV.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{run_dk_greedy, run_heuristic_reuse, run_single_policy};
use crate::env::{Env, EnvConfig, UserConfig};
use crate::policy::{read_policy_file, GaussianPolicy, HybridPolicy, NetworkShape, PolicyError, PolicyInit};
use crate::ssca_trainer::{JBarMode, MetricsRow, ReuseMode, StepSizes, TrainError, Trainer, TrainerConfig};

const STREAM_INIT: u64 = 5;

/// Seed offset used for the environment old policies are trained in.
pub const OLD_POLICY_SEED_OFFSET: u64 = 1000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("config key `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("unknown preset or missing file `{0}`")]
    UnknownConfig(String),
    #[error("unknown baseline `{0}` (expected dk, single, heuristic or hybrid)")]
    UnknownBaseline(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid(key: impl Into<String>, message: impl Into<String>) -> HarnessError {
    HarnessError::Invalid {
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OldPolicyRef {
    pub path: PathBuf,
}

/// Environment perturbation for training old policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Variant {
    pub path_loss_offset_db: f64,
    pub lambda_scale: f64,
}

impl Default for Variant {
    fn default() -> Self {
        Self {
            path_loss_offset_db: 0.0,
            lambda_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    pub slots: u64,

    pub antennas: usize,
    pub arrival_prob: f64,
    pub slot_seconds: f64,
    pub tau: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_variance_w: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub channel_correlation: f64,
    pub csi_nmse: f64,

    pub horizon: usize,
    pub batch: usize,
    pub varsigma: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub dk_std: f64,
    pub nu: f64,
    pub warmup_slots: usize,
    pub param_box: f64,
    /// `mean` or `half-window`.
    pub j_bar: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_scale: Option<f64>,
    pub ma_window: usize,
    pub heuristic_ema: f64,
    pub hidden: Vec<usize>,
    pub init_mean: f64,
    pub init_std: f64,
    pub init_gain: f64,

    pub ablate_dk: bool,
    pub ablate_old: bool,
    /// Slots an old policy is trained for by `make-old-policy`.
    pub old_policy_slots: u64,
    pub variant: Variant,

    pub user: Vec<UserConfig>,
    pub old_policy: Vec<OldPolicyRef>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let t = TrainerConfig::default();
        Self {
            name: String::new(),
            seeds: vec![1, 2, 3, 4, 5],
            slots: 20_000,
            antennas: 2,
            arrival_prob: 0.3,
            slot_seconds: 1e-3,
            tau: 1.0,
            bandwidth_hz: 10e6,
            tx_power_dbm: 12.0,
            noise_variance_w: 3e-17,
            alpha: None,
            channel_correlation: 0.0,
            csi_nmse: 0.0,
            horizon: t.horizon,
            batch: t.batch,
            varsigma: t.varsigma,
            kappa1: t.steps.kappa1,
            kappa2: t.steps.kappa2,
            dk_std: crate::policy::DEFAULT_DK_STD,
            nu: t.nu,
            warmup_slots: t.warmup_slots,
            param_box: t.param_box,
            j_bar: "mean".into(),
            cost_scale: None,
            ma_window: t.ma_window,
            heuristic_ema: 0.95,
            hidden: vec![64, 64],
            init_mean: PolicyInit::default().mean,
            init_std: PolicyInit::default().std,
            init_gain: PolicyInit::default().output_gain,
            ablate_dk: false,
            ablate_old: false,
            old_policy_slots: 20_000,
            variant: Variant::default(),
            user: Vec::new(),
            old_policy: Vec::new(),
        }
    }
}

fn users(deadlines: &[usize], lambdas: &[f64], path_loss: &[f64]) -> Vec<UserConfig> {
    deadlines
        .iter()
        .zip(lambdas)
        .zip(path_loss)
        .map(|((&deadline, &lambda_kbit), &path_loss_db)| UserConfig {
            deadline,
            lambda_kbit,
            path_loss_db,
        })
        .collect()
}

fn spread(k: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

pub const PRESETS: [&str; 4] = ["desk", "config1", "config2", "users10"];

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let large = |k: usize, lambdas: &[f64], deadlines: &[usize]| ScenarioConfig {
        name: name.into(),
        antennas: k / 2,
        arrival_prob: 0.3,
        bandwidth_hz: 58e6,
        tx_power_dbm: 12.0,
        horizon: 8,
        nu: 20.0,
        user: users(deadlines, lambdas, &spread(k, 130.0, 150.0)),
        ..ScenarioConfig::default()
    };
    match name {
        "desk" => Some(ScenarioConfig {
            name: name.into(),
            antennas: 2,
            bandwidth_hz: 10e6,
            horizon: 4,
            nu: 20.0,
            user: users(&[3, 4, 3, 4], &[8.0, 12.0, 8.0, 12.0], &[130.0, 136.0, 142.0, 148.0]),
            ..ScenarioConfig::default()
        }),
        "config1" => Some(large(8, &[22.0, 42.0, 62.0, 82.0, 22.0, 42.0, 62.0, 82.0], &[4, 5, 6, 7, 4, 5, 6, 7])),
        "config2" => Some(large(8, &[30.0, 50.0, 70.0, 90.0, 30.0, 50.0, 70.0, 90.0], &[4, 5, 6, 7, 4, 5, 6, 7])),
        "users10" => Some(large(
            10,
            &[22.0, 42.0, 62.0, 82.0, 30.0, 22.0, 42.0, 62.0, 82.0, 30.0],
            &[4, 5, 6, 7, 4, 5, 6, 7, 4, 5],
        )),
        _ => None,
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Parse {
            path: origin.into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            antennas: self.antennas,
            arrival_prob: self.arrival_prob,
            slot_seconds: self.slot_seconds,
            tau: self.tau,
            bandwidth_hz: self.bandwidth_hz,
            tx_power_dbm: self.tx_power_dbm,
            noise_variance_w: self.noise_variance_w,
            alpha: self.alpha,
            channel_correlation: self.channel_correlation,
            csi_nmse: self.csi_nmse,
            users: self.user.clone(),
        }
    }

    pub fn j_bar_mode(&self) -> Result<JBarMode, HarnessError> {
        match self.j_bar.as_str() {
            "mean" => Ok(JBarMode::Mean),
            "half-window" => Ok(JBarMode::HalfWindow),
            other => Err(invalid("j_bar", format!("expected `mean` or `half-window`, got `{other}`"))),
        }
    }

    pub fn trainer_config(&self) -> Result<TrainerConfig, HarnessError> {
        Ok(TrainerConfig {
            horizon: self.horizon,
            batch: self.batch,
            varsigma: self.varsigma,
            steps: StepSizes {
                kappa1: self.kappa1,
                kappa2: self.kappa2,
            },
            nu: self.nu,
            warmup_slots: self.warmup_slots,
            param_box: self.param_box,
            j_bar_mode: self.j_bar_mode()?,
            cost_scale: self.cost_scale,
            ma_window: self.ma_window,
            ..TrainerConfig::default()
        })
    }

    pub fn shape(&self) -> NetworkShape {
        let env = self.env_config();
        NetworkShape::new(env.feature_len(), self.hidden.clone(), env.num_users())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.user.is_empty() {
            return Err(invalid("user", "at least one [[user]] section is required"));
        }
        for (i, u) in self.user.iter().enumerate() {
            if u.deadline == 0 {
                return Err(invalid(format!("user[{i}].deadline"), "must be positive"));
            }
            if !(u.lambda_kbit > 0.0 && u.lambda_kbit.is_finite()) {
                return Err(invalid(format!("user[{i}].lambda_kbit"), "must be positive"));
            }
            if !(130.0..=150.0).contains(&u.path_loss_db) {
                return Err(invalid(format!("user[{i}].path_loss_db"), "must lie in [130, 150]"));
            }
        }
        self.env_config()
            .validate()
            .map_err(|e| invalid("environment", e.to_string()))?;
        if !(self.kappa1 > 0.5 && self.kappa1 < 1.0) {
            return Err(invalid("kappa1", "must lie in (0.5, 1)"));
        }
        if !(self.kappa2 > 0.5 && self.kappa2 <= 1.0) {
            return Err(invalid("kappa2", "must lie in (0.5, 1]"));
        }
        if self.kappa1 >= self.kappa2 {
            return Err(invalid("kappa1", "must be smaller than kappa2"));
        }
        if !(self.dk_std > 0.0 && self.dk_std.is_finite()) {
            return Err(invalid("dk_std", "must be positive"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(invalid("hidden", "needs at least one non-empty layer"));
        }
        if self.init_std.is_nan() || self.init_std <= 0.0 {
            return Err(invalid("init_std", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.heuristic_ema) {
            return Err(invalid("heuristic_ema", "must lie in [0, 1)"));
        }
        if self.variant.lambda_scale.is_nan() || self.variant.lambda_scale <= 0.0 {
            return Err(invalid("variant.lambda_scale", "must be positive"));
        }
        self.j_bar_mode()?;
        self.trainer_config()?
            .validate()
            .map_err(|e| invalid("trainer", e.to_string()))?;
        Ok(())
    }

    /// The environment an old policy is trained in.
    pub fn perturbed(&self, variant: Variant) -> ScenarioConfig {
        let mut out = self.clone();
        for u in &mut out.user {
            u.path_loss_db = (u.path_loss_db + variant.path_loss_offset_db).clamp(130.0, 150.0);
            u.lambda_kbit *= variant.lambda_scale;
        }
        out
    }
}

/// Loads a preset by name or a TOML file; old-policy paths are made
/// relative to the file's directory and must exist.
pub fn load_config(name_or_path: &str) -> Result<ScenarioConfig, HarnessError> {
    if let Some(p) = preset(name_or_path) {
        return Ok(p);
    }
    let path = Path::new(name_or_path);
    if !path.is_file() {
        return Err(HarnessError::UnknownConfig(name_or_path.into()));
    }
    let text = std::fs::read_to_string(path)?;
    let mut cfg = ScenarioConfig::from_toml(&text, name_or_path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    for (i, old) in cfg.old_policy.iter_mut().enumerate() {
        if old.path.is_relative() {
            old.path = base.join(&old.path);
        }
        if !old.path.is_file() {
            return Err(invalid(
                format!("old_policy[{i}].path"),
                format!("{} does not exist", old.path.display()),
            ));
        }
    }
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Hybrid,
    Single,
    Heuristic,
    DkGreedy,
}

impl std::str::FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hybrid" => Ok(Self::Hybrid),
            "single" => Ok(Self::Single),
            "heuristic" => Ok(Self::Heuristic),
            "dk" => Ok(Self::DkGreedy),
            other => Err(HarnessError::UnknownBaseline(other.into())),
        }
    }
}

/// One run's inputs besides the scenario.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub slots: u64,
    pub old: Vec<GaussianPolicy>,
    pub learn: bool,
    pub timing: bool,
}

impl RunSpec {
    pub fn new(algorithm: Algorithm, seed: u64, slots: u64) -> Self {
        Self {
            algorithm,
            seed,
            slots,
            old: Vec::new(),
            learn: true,
            timing: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub rows: Vec<MetricsRow>,
    pub rewards: Vec<f64>,
    pub policy: Option<HybridPolicy>,
}

/// The freshly initialized new network for `seed`; independent of the
/// environment's random streams.
pub fn new_network(cfg: &ScenarioConfig, seed: u64) -> GaussianPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_INIT);
    let init = PolicyInit {
        mean: cfg.init_mean,
        std: cfg.init_std,
        output_gain: cfg.init_gain,
    };
    GaussianPolicy::random(cfg.shape(), init, &mut rng)
}

pub fn hybrid_policy(cfg: &ScenarioConfig, seed: u64, old: &[GaussianPolicy]) -> Result<HybridPolicy, HarnessError> {
    let old = if cfg.ablate_old { Vec::new() } else { old.to_vec() };
    Ok(HybridPolicy::new(new_network(cfg, seed), old, !cfg.ablate_dk, cfg.dk_std)?)
}

pub fn load_old_policies(cfg: &ScenarioConfig) -> Result<Vec<GaussianPolicy>, HarnessError> {
    let shape = cfg.shape();
    cfg.old_policy
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let p = read_policy_file(&r.path)?;
            if *p.shape() != shape {
                return Err(invalid(
                    format!("old_policy[{i}].path"),
                    "network shape does not match this scenario",
                ));
            }
            Ok(p)
        })
        .collect()
}

pub fn run<F: FnMut(&MetricsRow)>(cfg: &ScenarioConfig, spec: &RunSpec, sink: F) -> Result<RunResult, HarnessError> {
    let env = Env::new(cfg.env_config(), spec.seed).map_err(TrainError::from)?;
    let mut tc = cfg.trainer_config()?;
    tc.learn = spec.learn;
    tc.timing = spec.timing;
    let out = match spec.algorithm {
        Algorithm::DkGreedy => {
            let out = run_dk_greedy(env, spec.slots, cfg.batch, cfg.ma_window, sink)?;
            return Ok(RunResult {
                rows: out.rows,
                rewards: out.rewards,
                policy: None,
            });
        }
        Algorithm::Hybrid => {
            let policy = hybrid_policy(cfg, spec.seed, &spec.old)?;
            Trainer::new(tc, env, policy, spec.seed)?.run(spec.slots, sink)?
        }
        Algorithm::Single => {
            let policy = HybridPolicy::single(new_network(cfg, spec.seed));
            run_single_policy(env, policy, tc, spec.seed, spec.slots, sink)?
        }
        Algorithm::Heuristic => {
            tc.reuse = ReuseMode::Heuristic { ema: cfg.heuristic_ema };
            let policy = hybrid_policy(cfg, spec.seed, &spec.old)?;
            run_heuristic_reuse(env, policy, tc, spec.seed, spec.slots, sink)?
        }
    };
    Ok(RunResult {
        rows: out.rows,
        rewards: out.rewards,
        policy: Some(out.policy),
    })
}

/// Evaluates a saved network without learning.
pub fn eval_policy<F: FnMut(&MetricsRow)>(
    cfg: &ScenarioConfig,
    network: GaussianPolicy,
    seed: u64,
    slots: u64,
    sink: F,
) -> Result<RunResult, HarnessError> {
    if *network.shape() != cfg.shape() {
        return Err(invalid("policy", "network shape does not match this scenario"));
    }
    let env = Env::new(cfg.env_config(), seed).map_err(TrainError::from)?;
    let mut tc = cfg.trainer_config()?;
    tc.learn = false;
    let out = Trainer::new(tc, env, HybridPolicy::single(network), seed)?.run(slots, sink)?;
    Ok(RunResult {
        rows: out.rows,
        rewards: out.rewards,
        policy: Some(out.policy),
    })
}

/// Trains a single network in the perturbed environment and returns it.
pub fn make_old_policy(cfg: &ScenarioConfig, variant: Variant, seed: u64, slots: u64) -> Result<GaussianPolicy, HarnessError> {
    let target = cfg.perturbed(variant);
    let spec = RunSpec::new(Algorithm::Single, seed, slots);
    let out = run(&target, &spec, |_| {})?;
    Ok(out.policy.expect("learning runs return a policy").new_policy().clone())
}

pub fn csv_header(components: usize, timing: bool) -> String {
    let mut h = String::from("iteration,slot,reward,ma_reward,drop_rate");
    for i in 0..components {
        let _ = write!(h, ",p_{i}");
    }
    h.push_str(",j_tilde");
    if timing {
        h.push_str(",wall_ms");
    }
    h
}

pub fn csv_row(row: &MetricsRow) -> String {
    let mut s = format!(
        "{},{},{},{},{}",
        row.iteration, row.slot, row.reward, row.ma_reward, row.drop_rate
    );
    for p in &row.probs {
        let _ = write!(s, ",{p}");
    }
    let _ = write!(s, ",{}", row.j_tilde);
    if let Some(ms) = row.wall_ms {
        let _ = write!(s, ",{ms:.3}");
    }
    s
}

/// Streams rows to a writer, emitting the header before the first row.
pub struct CsvSink<W: Write> {
    out: W,
    timing: bool,
    started: bool,
    error: Option<std::io::Error>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W, timing: bool) -> Self {
        Self {
            out,
            timing,
            started: false,
            error: None,
        }
    }

    pub fn write(&mut self, row: &MetricsRow) {
        if self.error.is_some() {
            return;
        }
        let mut res = Ok(());
        if !self.started {
            res = writeln!(self.out, "{}", csv_header(row.probs.len(), self.timing));
            self.started = true;
        }
        if res.is_ok() {
            res = writeln!(self.out, "{}", csv_row(row));
        }
        if let Err(e) = res {
            self.error = Some(e);
        }
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        if let Some(e) = self.error {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}
