//! `lppm`: build mobility MDPs, synthesize privacy-preserving cloaking
//! policies, simulate the adversary and verify invariance.
//!
//! Exit codes: 0 success, 1 error, 2 too few POIs, 3 infeasible or
//! escapable, 4 the two invariance checks disagree.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lppm_core::SynthesisMode;

use config::{BeliefPreset, ExperimentConfig, StateRef};

#[derive(Parser)]
#[command(name = "lppm", version, about = "Location-privacy policy synthesis over mobility MDPs")]
struct Cli {
    /// Log progress (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use a built-in model instead of an MDP file (only `campus`).
    #[arg(long)]
    fixture: Option<String>,
    /// Serialized MDP to operate on.
    #[arg(long)]
    mdp: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PrivacyArgs {
    /// Secret state label or index; repeat for several.
    #[arg(long = "secret")]
    secret: Vec<StateRef>,
    /// Threshold on the adversary's secret-state belief.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build an MDP from GPS traces (or emit a fixture).
    Build {
        #[command(flatten)]
        common: Common,
        /// Trace files (`.plt` or `.csv`).
        #[arg(long, num_args = 1..)]
        traces: Vec<PathBuf>,
    },
    /// Synthesize a policy and write `result.json`.
    Synthesize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        privacy: PrivacyArgs,
        /// unconstrained, eps_private or asymptotic.
        #[arg(long)]
        mode: Option<SynthesisMode>,
        /// Seed of the asymptotic multi-start.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the eps_private LP to `lp.txt`.
        #[arg(long)]
        dump_lp: bool,
    },
    /// Propagate the adversary belief under a synthesized policy.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        privacy: PrivacyArgs,
        /// Result file (default `<out>/result.json`).
        #[arg(long)]
        result: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// uniform, uniform_excluding_secret, unsafe:<mass> or explicit:<p1,p2,...>.
        #[arg(long)]
        b0: Option<BeliefPreset>,
    },
    /// Check that a result keeps the safe belief set invariant.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        privacy: PrivacyArgs,
        #[arg(long)]
        result: Option<PathBuf>,
    },
    /// Roll out the max-entropy, max-inference-error and (D, ε) mechanisms.
    Baselines {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        privacy: PrivacyArgs,
        #[arg(long)]
        horizon: Option<usize>,
        /// ε of the (D, ε) baseline.
        #[arg(long)]
        dp_epsilon: Option<f64>,
    },
}

fn apply_common(c: Common) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if c.fixture.is_some() {
        cfg.input.fixture = c.fixture;
        cfg.input.mdp = None;
    }
    if c.mdp.is_some() {
        cfg.input.mdp = c.mdp;
        cfg.input.fixture = None;
    }
    if c.out.is_some() {
        cfg.output_dir = c.out;
    }
    Ok(cfg)
}

fn apply_privacy(cfg: &mut ExperimentConfig, p: PrivacyArgs) {
    if !p.secret.is_empty() {
        cfg.privacy.secret = p.secret;
    }
    if let Some(e) = p.epsilon {
        cfg.privacy.epsilon = e;
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Build { common, traces } => {
            let mut cfg = apply_common(common)?;
            if !traces.is_empty() {
                cfg.input.traces = traces;
                cfg.input.fixture = None;
            }
            commands::build(&cfg)
        }
        Command::Synthesize { common, privacy, mode, seed, dump_lp } => {
            let mut cfg = apply_common(common)?;
            apply_privacy(&mut cfg, privacy);
            if let Some(m) = mode {
                cfg.synthesis.mode = m;
            }
            if let Some(s) = seed {
                cfg.synthesis.seed = s;
            }
            cfg.synthesis.dump_lp |= dump_lp;
            commands::synthesize(&cfg)
        }
        Command::Simulate { common, privacy, result, horizon, seed, b0 } => {
            let mut cfg = apply_common(common)?;
            apply_privacy(&mut cfg, privacy);
            if result.is_some() {
                cfg.input.result = result;
            }
            if let Some(h) = horizon {
                cfg.simulation.horizon = h;
            }
            if let Some(s) = seed {
                cfg.simulation.seed = s;
            }
            if let Some(b) = b0 {
                cfg.simulation.b0 = b;
            }
            commands::simulate_cmd(&cfg)
        }
        Command::Verify { common, privacy, result } => {
            let mut cfg = apply_common(common)?;
            apply_privacy(&mut cfg, privacy);
            if result.is_some() {
                cfg.input.result = result;
            }
            commands::verify(&cfg)
        }
        Command::Baselines { common, privacy, horizon, dp_epsilon } => {
            let mut cfg = apply_common(common)?;
            apply_privacy(&mut cfg, privacy);
            if cfg.input.fixture.is_none() && cfg.input.mdp.is_none() {
                cfg.input.fixture = Some("campus".into());
            }
            if let Some(h) = horizon {
                cfg.baselines.horizon = h;
            }
            if let Some(e) = dp_epsilon {
                cfg.baselines.dp_epsilon = e;
            }
            commands::baselines(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
