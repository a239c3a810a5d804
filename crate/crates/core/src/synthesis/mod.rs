//! Privacy-preserving policy synthesis and verification.
//!
//! * [`synthesize_unconstrained`]: average-cost optimum over occupancy
//!   measures, no privacy constraint.
//! * [`synthesize_eps_private`]: the same LP plus the invariance
//!   certificate rows, so every safe prior stays safe forever.
//! * [`synthesize_asymptotic`]: only the stationary adversary belief must
//!   be safe; a bilinear problem attacked by sequential linearization with
//!   multiple random starts.
//! * [`verify_invariance`] / [`theorem1_certificate`]: decide invariance of
//!   the safe belief set for a given adversary chain, two independent ways.

mod asymptotic;
mod occupancy;
mod verify;

use serde::{Deserialize, Serialize};

use crate::adversary::Belief;
use crate::mdp::{Distribution, OccupancyMeasure, Policy};

pub use asymptotic::{synthesize_asymptotic, AsymptoticOptions};
pub use occupancy::{
    diagnose_eps_infeasibility, eps_private_lp, synthesize_eps_private, synthesize_unconstrained,
    InfeasibilityDiagnosis,
};
pub use verify::{secret_inflow, theorem1_certificate, verify_invariance, Certificate, InvarianceVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisMode {
    Unconstrained,
    EpsPrivate,
    Asymptotic,
}

impl std::fmt::Display for SynthesisMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Unconstrained => "unconstrained",
            Self::EpsPrivate => "eps_private",
            Self::Asymptotic => "asymptotic",
        })
    }
}

impl std::str::FromStr for SynthesisMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "unconstrained" => Ok(Self::Unconstrained),
            "eps_private" | "eps-private" => Ok(Self::EpsPrivate),
            "asymptotic" => Ok(Self::Asymptotic),
            other => Err(crate::Error::InvalidArgument(format!(
                "unknown synthesis mode {other:?} (expected unconstrained, eps_private or asymptotic)"
            ))),
        }
    }
}

/// Options shared by all synthesis modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisOptions {
    /// Lower bound `δ` on `θ(s, a)` for available pairs; 0 disables it.
    pub theta_floor: f64,
    /// Deterministic policies to enumerate when checking the unichain
    /// property before solving.
    pub unichain_budget: u128,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { theta_floor: 0.0, unichain_budget: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub mode: SynthesisMode,
    /// Simplex pivots (summed over all LPs for the asymptotic mode).
    pub lp_iterations: usize,
    pub max_violation: f64,
    /// Largest violation of the occupancy balance by the returned `θ`.
    pub balance_residual: f64,
    /// `‖M_adv(θ)ᵀ b∞ − b∞‖₁` for the asymptotic mode.
    pub fixed_point_residual: Option<f64>,
    pub rounds: Option<usize>,
    pub best_start: Option<usize>,
    pub feasible_starts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub theta: OccupancyMeasure,
    pub policy: Policy,
    pub p_inf: Distribution,
    /// Average quality loss `Σ θ u`.
    pub v: f64,
    pub certificate: Option<Certificate>,
    pub b_inf: Option<Belief>,
    pub diagnostics: Diagnostics,
}

#[cfg(test)]
mod tests;
