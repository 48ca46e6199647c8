use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hrl_sched::harness_cli::{
    eval_policy, load_config, load_old_policies, make_old_policy, preset, run, Algorithm, CsvSink, HarnessError,
    RunSpec, ScenarioConfig, Variant, OLD_POLICY_SEED_OFFSET, PRESETS,
};
use hrl_sched::policy::{read_policy_file, write_policy_file};

#[derive(Parser)]
#[command(name = "hrl-sched", version, about = "Hard-latency MU-MIMO scheduling with hybrid-policy RL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Preset name or TOML scenario file.
    #[arg(long, default_value = "desk")]
    config: String,
    /// Defaults to the first entry of the scenario's seed list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    csi_nmse: Option<f64>,
    /// Metrics CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append a wall-clock column (breaks byte-identical output).
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train with the hybrid learner or one of the learning baselines.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "hybrid")]
        algorithm: String,
        /// Additional reusable policy files.
        #[arg(long = "old-policy")]
        old_policy: Vec<PathBuf>,
        #[arg(long)]
        ablate_dk: bool,
        #[arg(long)]
        ablate_old: bool,
        /// Where to save the trained new network.
        #[arg(long)]
        save_policy: Option<PathBuf>,
    },
    /// Run without learning: a saved network or a named baseline.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "baseline")]
        policy: Option<PathBuf>,
        /// dk, single, heuristic or hybrid.
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long = "old-policy")]
        old_policy: Vec<PathBuf>,
        #[arg(long)]
        ablate_dk: bool,
        #[arg(long)]
        ablate_old: bool,
    },
    /// Train a single network in a perturbed environment and save it.
    MakeOldPolicy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        path_loss_offset_db: Option<f64>,
        #[arg(long)]
        lambda_scale: Option<f64>,
        #[arg(long)]
        save_policy: PathBuf,
    },
    /// List presets, or print one as TOML.
    Presets { name: Option<String> },
}

fn scenario(common: &Common) -> Result<ScenarioConfig, HarnessError> {
    let mut cfg = load_config(&common.config)?;
    if let Some(b) = common.batch {
        cfg.batch = b;
    }
    if let Some(n) = common.csi_nmse {
        cfg.csi_nmse = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn seed_of(common: &Common, cfg: &ScenarioConfig) -> u64 {
    common.seed.unwrap_or_else(|| cfg.seeds.first().copied().unwrap_or(1))
}

fn with_sink<T>(
    common: &Common,
    f: impl FnOnce(&mut dyn FnMut(&hrl_sched::ssca_trainer::MetricsRow)) -> Result<T, HarnessError>,
) -> Result<T, HarnessError> {
    let out: Box<dyn Write> = match &common.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let mut sink = CsvSink::new(out, common.timing);
    let result = f(&mut |row| sink.write(row));
    sink.finish()?;
    result
}

fn old_policies(cfg: &mut ScenarioConfig, extra: &[PathBuf]) -> Result<Vec<hrl_sched::policy::GaussianPolicy>, HarnessError> {
    cfg.old_policy
        .extend(extra.iter().map(|p| hrl_sched::harness_cli::OldPolicyRef { path: p.clone() }));
    load_old_policies(cfg)
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train {
            common,
            algorithm,
            old_policy,
            ablate_dk,
            ablate_old,
            save_policy,
        } => {
            let mut cfg = scenario(&common)?;
            cfg.ablate_dk |= ablate_dk;
            cfg.ablate_old |= ablate_old;
            let mut spec = RunSpec::new(algorithm.parse()?, seed_of(&common, &cfg), common.slots.unwrap_or(cfg.slots));
            spec.old = old_policies(&mut cfg, &old_policy)?;
            spec.timing = common.timing;
            let out = with_sink(&common, |sink| run(&cfg, &spec, sink))?;
            if let (Some(path), Some(policy)) = (save_policy, out.policy) {
                write_policy_file(&path, policy.new_policy())?;
            }
        }
        Command::Eval {
            common,
            policy,
            baseline,
            old_policy,
            ablate_dk,
            ablate_old,
        } => {
            let mut cfg = scenario(&common)?;
            cfg.ablate_dk |= ablate_dk;
            cfg.ablate_old |= ablate_old;
            let seed = seed_of(&common, &cfg);
            let slots = common.slots.unwrap_or(cfg.slots);
            if let Some(path) = policy {
                let net = read_policy_file(&path)?;
                with_sink(&common, |sink| eval_policy(&cfg, net, seed, slots, sink))?;
            } else {
                let algorithm: Algorithm = baseline.as_deref().unwrap_or("dk").parse()?;
                let mut spec = RunSpec::new(algorithm, seed, slots);
                spec.old = old_policies(&mut cfg, &old_policy)?;
                spec.learn = false;
                spec.timing = common.timing;
                with_sink(&common, |sink| run(&cfg, &spec, sink))?;
            }
        }
        Command::MakeOldPolicy {
            common,
            path_loss_offset_db,
            lambda_scale,
            save_policy,
        } => {
            let cfg = scenario(&common)?;
            let mut variant: Variant = cfg.variant;
            if let Some(o) = path_loss_offset_db {
                variant.path_loss_offset_db = o;
            }
            if let Some(s) = lambda_scale {
                variant.lambda_scale = s;
            }
            let seed = common.seed.unwrap_or(seed_of(&common, &cfg) + OLD_POLICY_SEED_OFFSET);
            let slots = common.slots.unwrap_or(cfg.old_policy_slots);
            let net = make_old_policy(&cfg, variant, seed, slots)?;
            write_policy_file(&save_policy, &net)?;
        }
        Command::Presets { name } => match name {
            None => PRESETS.iter().for_each(|p| println!("{p}")),
            Some(n) => {
                let p = preset(&n).ok_or(HarnessError::UnknownConfig(n))?;
                print!("{}", p.to_toml());
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
