//! Experiment configuration: one TOML file, every key optional, overridden
//! by command-line flags. Relative paths are resolved against the config
//! file's directory.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use lppm_core::mdp::Mdp;
use lppm_core::metrics::DistanceKind;
use lppm_core::mobility::{ClusterParams, TraceFormat};
use lppm_core::synthesis::SynthesisMode;
use lppm_core::{Distribution, PrivacySpec};
use ndarray::Array1;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub input: InputConfig,
    pub cluster: Option<ClusterParams>,
    #[serde(default)]
    pub privacy: PrivacyConfig,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub baselines: BaselinesConfig,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// Trace files (`.plt` or `.csv`).
    #[serde(default)]
    pub traces: Vec<PathBuf>,
    pub format: Option<TraceFormat>,
    /// A serialized MDP, used instead of traces by every command but `build`.
    pub mdp: Option<PathBuf>,
    /// Built-in model name; only `campus` exists.
    pub fixture: Option<String>,
    /// A synthesis result consumed by `simulate` and `verify`.
    pub result: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyConfig {
    /// Secret states by label (`"s4"`) or zero-based index.
    pub secret: Vec<StateRef>,
    pub epsilon: f64,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        Self { secret: vec![StateRef::Label("s4".into())], epsilon: 0.2 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisConfig {
    pub mode: SynthesisMode,
    pub theta_floor: f64,
    pub unichain_budget: u64,
    pub starts: usize,
    pub seed: u64,
    pub max_rounds: usize,
    pub margin: f64,
    /// Also write the LP handed to the solver (eps_private only).
    pub dump_lp: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            mode: SynthesisMode::EpsPrivate,
            theta_floor: 0.0,
            unichain_budget: 1_000_000,
            starts: 16,
            seed: 0,
            max_rounds: 200,
            margin: 1e-4,
            dump_lp: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub horizon: usize,
    pub seed: u64,
    pub b0: BeliefPreset,
    pub distance: DistanceKind,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { horizon: 1000, seed: 0, b0: BeliefPreset::UniformExcludingSecret, distance: DistanceKind::Haversine }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselinesConfig {
    pub horizon: usize,
    /// Threshold of the (D, ε) baseline.
    pub dp_epsilon: f64,
}

impl Default for BaselinesConfig {
    fn default() -> Self {
        Self { horizon: 50, dp_epsilon: 0.7 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum StateRef {
    Index(usize),
    Label(String),
}

impl StateRef {
    pub fn resolve(&self, mdp: &Mdp) -> anyhow::Result<usize> {
        match self {
            StateRef::Index(i) if *i < mdp.n_states() => Ok(*i),
            StateRef::Index(i) => bail!("state index {i} out of range for {} states", mdp.n_states()),
            StateRef::Label(l) => (0..mdp.n_states())
                .find(|&s| mdp.state_label(s) == *l)
                .with_context(|| format!("no state labelled {l:?}")),
        }
    }
}

impl FromStr for StateRef {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(s.parse().map(StateRef::Index).unwrap_or_else(|_| StateRef::Label(s.to_string())))
    }
}

/// Initial adversary belief.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefPreset {
    Uniform,
    /// Zero on secret states, uniform elsewhere.
    UniformExcludingSecret,
    /// `mass` spread evenly on secret states, the rest evenly elsewhere.
    Unsafe(f64),
    Explicit(Vec<f64>),
}

impl FromStr for BeliefPreset {
    type Err = anyhow::Error;

    /// `uniform`, `uniform_excluding_secret`, `unsafe:0.2` or
    /// `explicit:0.5,0.5`.
    fn from_str(s: &str) -> anyhow::Result<Self> {
        let (head, tail) = s.split_once(':').unwrap_or((s, ""));
        Ok(match head {
            "uniform" => Self::Uniform,
            "uniform_excluding_secret" => Self::UniformExcludingSecret,
            "unsafe" => Self::Unsafe(tail.parse().with_context(|| format!("bad mass in {s:?}"))?),
            "explicit" => Self::Explicit(
                tail.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().with_context(|| format!("bad vector in {s:?}"))?,
            ),
            _ => bail!("unknown belief preset {s:?}"),
        })
    }
}

impl BeliefPreset {
    pub fn build(&self, spec: &PrivacySpec) -> anyhow::Result<Distribution> {
        let n = spec.n_states();
        let k = spec.secret_states().len() as f64;
        let spread = |secret_mass: f64| {
            Array1::from_shape_fn(n, |s| if spec.is_secret(s) { secret_mass / k } else { (1.0 - secret_mass) / (n as f64 - k) })
        };
        let b = match self {
            Self::Uniform => return Ok(Distribution::uniform(n)),
            Self::UniformExcludingSecret => spread(0.0),
            Self::Unsafe(mass) => {
                if !(0.0..=1.0).contains(mass) {
                    bail!("unsafe prior mass must lie in [0, 1], got {mass}");
                }
                spread(*mass)
            }
            Self::Explicit(v) => {
                if v.len() != n {
                    bail!("explicit b0 has {} entries for {n} states", v.len());
                }
                Array1::from(v.clone())
            }
        };
        Ok(Distribution::new(b)?)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.input.traces.iter_mut().for_each(fix);
        cfg.input.mdp.as_mut().map(fix);
        cfg.input.result.as_mut().map(fix);
        cfg.output_dir.as_mut().map(fix);
        Ok(cfg)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn privacy_spec(&self, mdp: &Mdp) -> anyhow::Result<PrivacySpec> {
        let secret = self.privacy.secret.iter().map(|r| r.resolve(mdp)).collect::<anyhow::Result<Vec<_>>>()?;
        Ok(PrivacySpec::new(mdp.n_states(), secret, self.privacy.epsilon)?)
    }

    pub fn trace_format(&self, path: &Path) -> anyhow::Result<TraceFormat> {
        self.input
            .format
            .or_else(|| TraceFormat::from_path(path))
            .with_context(|| format!("cannot tell the trace format of {}; set input.format", path.display()))
    }
}
