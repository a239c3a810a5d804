use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use lppm_core::adversary::{adversary_matrix, belief_trajectory};
use lppm_core::baselines::rollout;
use lppm_core::fixtures::campus;
use lppm_core::io::{
    load_mdp, load_result, save_mdp, save_result, write_beliefs_csv, write_metrics_csv, write_path_csv, write_poi_summary_csv, write_quality_csv,
};
use lppm_core::mdp::{induce_chain, simulate};
use lppm_core::metrics::{eps_privacy_check, PrivacyVerdict};
use lppm_core::mobility::{build_model, parse_traces, TraceDataset};
use lppm_core::synthesis::{
    diagnose_eps_infeasibility, eps_private_lp, synthesize_asymptotic, synthesize_eps_private, synthesize_unconstrained,
    theorem1_certificate, verify_invariance, AsymptoticOptions, InvarianceVerdict,
};
use lppm_core::{BaselineKind, DistanceMatrix, Distribution, Mdp, SynthesisMode, SynthesisOptions};

use crate::config::ExperimentConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_NO_POIS: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_DISAGREEMENT: u8 = 4;

fn create_out(cfg: &ExperimentConfig) -> anyhow::Result<PathBuf> {
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn csv_file(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

/// The model named by `input.fixture` or `input.mdp`, else the
/// `mdp.json` left in the output directory by `build`.
pub fn load_model(cfg: &ExperimentConfig) -> anyhow::Result<Mdp> {
    let path = match (&cfg.input.fixture, &cfg.input.mdp) {
        (Some(f), _) if f == "campus" => return Ok(campus()),
        (Some(f), _) => bail!("unknown fixture {f:?} (only \"campus\" exists)"),
        (None, Some(path)) => path.clone(),
        (None, None) => {
            let built = cfg.output_dir().join("mdp.json");
            if !built.exists() {
                bail!("no model given: pass --fixture campus or --mdp <file>, or run build first");
            }
            built
        }
    };
    load_mdp(&path).with_context(|| format!("loading MDP {}", path.display()))
}

pub fn build(cfg: &ExperimentConfig) -> anyhow::Result<u8> {
    if cfg.input.fixture.is_some() {
        let mdp = load_model(cfg)?;
        let dir = create_out(cfg)?;
        save_mdp(&mdp, &dir.join("mdp.json"))?;
        println!("wrote {} ({} states, {} actions)", dir.join("mdp.json").display(), mdp.n_states(), mdp.n_actions());
        return Ok(EXIT_OK);
    }
    if cfg.input.traces.is_empty() {
        bail!("no input: pass --traces <file>... or --fixture campus");
    }
    if let Some(missing) = cfg.input.traces.iter().find(|p| !p.exists()) {
        bail!("input file {} does not exist", missing.display());
    }
    let params = cfg.cluster.clone().context("building from traces needs a [cluster] section in the config")?;
    let mut traces = TraceDataset::default();
    for path in &cfg.input.traces {
        let ds = parse_traces(path, cfg.trace_format(path)?).with_context(|| format!("reading {}", path.display()))?;
        traces.extend(ds);
    }
    log::info!("{} samples from {} users, checksum {}", traces.len(), traces.users().len(), traces.checksum());
    let model = match build_model(&traces, &params) {
        Err(e @ lppm_core::Error::InsufficientPois { .. }) => {
            eprintln!("error: {e}");
            return Ok(EXIT_NO_POIS);
        }
        other => other?,
    };
    let dir = create_out(cfg)?;
    save_mdp(&model.mdp, &dir.join("mdp.json"))?;
    write_poi_summary_csv(csv_file(&dir, "pois.csv")?, &model.pois, &model.cloaks)?;
    println!(
        "wrote {} ({} POIs, {} cloaks) and {}",
        dir.join("mdp.json").display(),
        model.pois.len(),
        model.cloaks.len(),
        dir.join("pois.csv").display()
    );
    Ok(EXIT_OK)
}

pub fn synthesize(cfg: &ExperimentConfig) -> anyhow::Result<u8> {
    let mdp = load_model(cfg)?;
    let s = &cfg.synthesis;
    let opts = SynthesisOptions { theta_floor: s.theta_floor, unichain_budget: s.unichain_budget as u128 };
    let result = match s.mode {
        SynthesisMode::Unconstrained => synthesize_unconstrained(&mdp, &opts),
        SynthesisMode::EpsPrivate => {
            let spec = cfg.privacy_spec(&mdp)?;
            if s.dump_lp {
                let dir = create_out(cfg)?;
                fs::write(dir.join("lp.txt"), eps_private_lp(&mdp, &spec, s.theta_floor).dump_text())?;
            }
            let res = synthesize_eps_private(&mdp, &spec, &opts);
            if matches!(res, Err(lppm_core::Error::Infeasible(_))) {
                eprintln!("infeasible: {}", diagnose_eps_infeasibility(&mdp, &spec, &opts)?);
                return Ok(EXIT_INFEASIBLE);
            }
            res
        }
        SynthesisMode::Asymptotic => {
            let spec = cfg.privacy_spec(&mdp)?;
            let aopts = AsymptoticOptions {
                starts: s.starts,
                seed: s.seed,
                max_rounds: s.max_rounds,
                margin: s.margin,
                base: opts,
                ..Default::default()
            };
            synthesize_asymptotic(&mdp, &spec, &aopts)
        }
    };
    let result = match result {
        Err(e @ lppm_core::Error::NoFeasiblePoint(_)) => {
            eprintln!("infeasible: {e}");
            return Ok(EXIT_INFEASIBLE);
        }
        other => other?,
    };
    let dir = create_out(cfg)?;
    save_result(&result, &dir.join("result.json"))?;
    println!("mode: {}", s.mode);
    println!("v = {:.6}", result.v);
    if let Some(b) = &result.b_inf {
        let spec = cfg.privacy_spec(&mdp)?;
        println!("stationary secret mass = {:.6}", lppm_core::metrics::secret_mass(b, &spec));
    }
    println!("wrote {}", dir.join("result.json").display());
    Ok(EXIT_OK)
}

fn result_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.input.result.clone().unwrap_or_else(|| cfg.output_dir().join("result.json"))
}

fn distances(mdp: &Mdp, cfg: &ExperimentConfig) -> DistanceMatrix {
    DistanceMatrix::from_mdp(mdp, cfg.simulation.distance).unwrap_or_else(|_| {
        log::warn!("MDP has no state coordinates; using 0/1 distances");
        DistanceMatrix::hamming(mdp.n_states())
    })
}

pub fn simulate_cmd(cfg: &ExperimentConfig) -> anyhow::Result<u8> {
    let mdp = load_model(cfg)?;
    let spec = cfg.privacy_spec(&mdp)?;
    let path = result_path(cfg);
    let result = load_result(&path, &mdp).with_context(|| format!("loading result {}", path.display()))?;
    let horizon = cfg.simulation.horizon;
    let b0 = cfg.simulation.b0.build(&spec)?;

    let chain = adversary_matrix(&mdp, &result.theta);
    let beliefs = if horizon == 0 { Vec::new() } else { belief_trajectory(&chain, &b0, horizon - 1)? };
    let user = induce_chain(&mdp, &result.policy)?;
    let mut p = mdp.p0().clone();
    let mut v_hat = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let v: f64 = (0..mdp.n_states())
            .map(|s| p[s] * (0..mdp.n_actions()).map(|a| result.policy.prob(s, a) * mdp.utility()[[s, a]]).sum::<f64>())
            .sum();
        v_hat.push(v);
        p = user.step(&p);
    }

    let dir = create_out(cfg)?;
    let labels: Vec<String> = (0..mdp.n_states()).map(|s| mdp.state_label(s)).collect();
    write_beliefs_csv(csv_file(&dir, "beliefs.csv")?, &labels, &beliefs, &spec)?;
    write_metrics_csv(csv_file(&dir, "metrics.csv")?, &beliefs, &distances(&mdp, cfg), &spec)?;
    write_quality_csv(csv_file(&dir, "quality.csv")?, &v_hat)?;
    write_path_csv(csv_file(&dir, "path.csv")?, &mdp, &simulate(&mdp, &result.policy, horizon, cfg.simulation.seed))?;

    if !beliefs.is_empty() {
        match eps_privacy_check(&beliefs, &spec)? {
            PrivacyVerdict::Holds => println!("secret mass stays <= {} for all {horizon} steps", spec.epsilon()),
            PrivacyVerdict::Violated { t, mass } => println!("first violation at t = {t}: secret mass {mass:.6} > {}", spec.epsilon()),
        }
    }
    println!("wrote beliefs.csv, metrics.csv, quality.csv, path.csv to {}", dir.display());
    Ok(EXIT_OK)
}

pub fn verify(cfg: &ExperimentConfig) -> anyhow::Result<u8> {
    let mdp = load_model(cfg)?;
    let spec = cfg.privacy_spec(&mdp)?;
    let path = result_path(cfg);
    let result = load_result(&path, &mdp).with_context(|| format!("loading result {}", path.display()))?;
    let chain = adversary_matrix(&mdp, &result.theta);
    let exact = verify_invariance(&chain, &spec)?;
    let certificate = theorem1_certificate(&chain, &spec)?;
    match (&exact, &certificate) {
        (InvarianceVerdict::Invariant { worst_mass }, Some(c)) => {
            println!("invariant: worst one-step secret mass {worst_mass:.6} <= {}", spec.epsilon());
            println!("certificate: z = {:.6}", c.z);
            Ok(EXIT_OK)
        }
        (InvarianceVerdict::Escapable { witness, image_mass }, None) => {
            println!("escapable: a safe belief reaches secret mass {image_mass:.6} > {} in one step", spec.epsilon());
            let parts: Vec<String> = witness.as_array().iter().map(|x| format!("{x:.6}")).collect();
            println!("witness belief: [{}]", parts.join(", "));
            Ok(EXIT_INFEASIBLE)
        }
        _ => {
            eprintln!("internal error: exact check says {exact:?} but certificate is {}", if certificate.is_some() { "feasible" } else { "infeasible" });
            Ok(EXIT_DISAGREEMENT)
        }
    }
}

pub fn baselines(cfg: &ExperimentConfig) -> anyhow::Result<u8> {
    let mdp = load_model(cfg)?;
    let spec = cfg.privacy_spec(&mdp)?;
    let d = distances(&mdp, cfg);
    let n = mdp.n_states();
    let b0 = Distribution::uniform(n);
    let p0 = Distribution::uniform(n);
    let dir = create_out(cfg)?;
    for kind in [
        BaselineKind::MaxEntropy,
        BaselineKind::MaxInferenceError,
        BaselineKind::DifferentialPrivacy { epsilon: cfg.baselines.dp_epsilon },
    ] {
        let horizon = cfg.baselines.horizon;
        let beliefs = if horizon == 0 {
            Vec::new()
        } else {
            rollout(&mdp, kind, &b0, &p0, horizon - 1, Some(&d)).with_context(|| format!("{} rollout", kind.name()))?.beliefs
        };
        let name = format!("{}.csv", kind.name());
        write_metrics_csv(csv_file(&dir, &name)?, &beliefs, &d, &spec)?;
        println!("wrote {}", dir.join(name).display());
    }
    Ok(EXIT_OK)
}
