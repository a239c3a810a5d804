//! Occupancy-measure LPs: the unconstrained average-cost optimum and the
//! ε-private program with the invariance certificate built in.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::adversary::adversary_matrix;
use crate::error::{Error, Result};
use crate::mdp::{
    average_cost, check_unichain_exhaustive, policy_from_theta, Mdp, OccupancyMeasure, UnichainVerdict,
};
use crate::metrics::PrivacySpec;
use crate::optim::{solve_lp, LinearProgram, LpStatus};

use super::verify::Certificate;
use super::{Diagnostics, SynthesisMode, SynthesisOptions, SynthesisResult};

/// Rejects multichain MDPs. Past the enumeration budget the check is
/// skipped with a warning and the result's chain is checked afterwards.
pub(crate) fn require_unichain(mdp: &Mdp, opts: &SynthesisOptions) -> Result<()> {
    match check_unichain_exhaustive(mdp, opts.unichain_budget) {
        UnichainVerdict::Unichain { .. } => Ok(()),
        UnichainVerdict::NotUnichain { witness } => Err(Error::NotUnichain { witness }),
        UnichainVerdict::BudgetExceeded { required } => {
            log::warn!(
                "unichain check skipped: {required} deterministic policies exceed the budget of {}",
                opts.unichain_budget
            );
            Ok(())
        }
    }
}

pub(crate) fn theta_index(mdp: &Mdp, s: usize, a: usize) -> usize {
    s * mdp.n_actions() + a
}

/// LP over `θ` (row-major, `n·m` entries) followed by `extra` trailing
/// variables, with occupancy balance, normalization and availability
/// bounds. `θ(s, a) ≥ floor` on available pairs.
pub(crate) fn occupancy_lp(mdp: &Mdp, extra: usize, floor: f64) -> LinearProgram {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let d = n * m + extra;
    let mut c = vec![0.0; d];
    for s in 0..n {
        for a in 0..m {
            c[theta_index(mdp, s, a)] = mdp.utility()[[s, a]];
        }
    }
    let mut lp = LinearProgram::new(c);
    for target in 0..n {
        let mut row = vec![0.0; d];
        for a in 0..m {
            row[theta_index(mdp, target, a)] += 1.0;
        }
        for s in 0..n {
            for a in 0..m {
                row[theta_index(mdp, s, a)] -= mdp.transition(a)[[s, target]];
            }
        }
        lp.add_eq(row, 0.0);
    }
    let mut norm = vec![0.0; d];
    norm[..n * m].fill(1.0);
    lp.add_eq(norm, 1.0);
    for s in 0..n {
        for a in 0..m {
            let j = theta_index(mdp, s, a);
            if mdp.is_available(s, a) {
                lp.set_bounds(j, floor, f64::INFINITY);
            } else {
                lp.set_bounds(j, 0.0, 0.0);
            }
        }
    }
    lp
}

/// Appends the certificate rows over trailing variables `z` (at
/// `z_index`) and `β` (the next `n`):
/// `Σ_{s,a} θ(s,a) T[a](j, S_s) + (ε − A_s(j)) z + β_j ≤ ε`.
pub(crate) fn add_certificate_rows(lp: &mut LinearProgram, mdp: &Mdp, spec: &PrivacySpec, z_index: usize, slack: Option<usize>) {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let sel = spec.selector();
    let eps = spec.epsilon();
    let d = lp.num_vars();
    for j in 0..n {
        let mut row = vec![0.0; d];
        for a in 0..m {
            let into_secret: f64 = spec.secret_states().iter().map(|&i| mdp.transition(a)[[j, i]]).sum();
            if into_secret != 0.0 {
                for s in 0..n {
                    row[theta_index(mdp, s, a)] = into_secret;
                }
            }
        }
        row[z_index] = eps - sel[j];
        row[z_index + 1 + j] = 1.0;
        if let Some(sigma) = slack {
            row[sigma] = -1.0;
        }
        lp.add_ub(row, eps);
    }
}

pub(crate) fn theta_matrix(mdp: &Mdp, x: &[f64]) -> Array2<f64> {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    Array2::from_shape_fn((n, m), |(s, a)| x[theta_index(mdp, s, a)])
}

pub(crate) fn finish(
    mdp: &Mdp,
    theta: OccupancyMeasure,
    mode: SynthesisMode,
    lp_iterations: usize,
    max_violation: f64,
    certificate: Option<Certificate>,
) -> Result<SynthesisResult> {
    let (policy, p_inf) = policy_from_theta(&theta, mdp)?;
    let v = average_cost(&theta, mdp);
    let diagnostics = Diagnostics {
        mode,
        lp_iterations,
        max_violation,
        balance_residual: theta.balance_residual(mdp),
        fixed_point_residual: None,
        rounds: None,
        best_start: None,
        feasible_starts: None,
    };
    Ok(SynthesisResult { theta, policy, p_inf, v, certificate, b_inf: None, diagnostics })
}

/// Minimizes `Σ θ u` over occupancy measures, ignoring privacy.
pub fn synthesize_unconstrained(mdp: &Mdp, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    require_unichain(mdp, opts)?;
    let lp = occupancy_lp(mdp, 0, opts.theta_floor);
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Infeasible("no stationary occupancy measure exists".into())),
        other => return Err(Error::Solver(format!("occupancy LP ended with {other:?}"))),
    }
    let theta = OccupancyMeasure::from_lp(theta_matrix(mdp, &sol.x), mdp)?;
    finish(mdp, theta, SynthesisMode::Unconstrained, sol.iterations, sol.max_violation, None)
}

/// Minimizes `Σ θ u` subject to the safe belief set being invariant under
/// the adversary chain `M_adv(θ)`. One LP over `(θ, z, β)`.
pub fn synthesize_eps_private(mdp: &Mdp, spec: &PrivacySpec, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    check_spec(mdp, spec)?;
    require_unichain(mdp, opts)?;
    let lp = eps_private_lp(mdp, spec, opts.theta_floor);
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            let diag = diagnose_eps_infeasibility(mdp, spec, opts)?;
            return Err(Error::Infeasible(diag.to_string()));
        }
        other => return Err(Error::Solver(format!("ε-private LP ended with {other:?}"))),
    }
    let nm = mdp.n_states() * mdp.n_actions();
    let theta = OccupancyMeasure::from_lp(theta_matrix(mdp, &sol.x), mdp)?;
    let certificate = Certificate { z: sol.x[nm].max(0.0), beta: sol.x[nm + 1..].iter().map(|v| v.max(0.0)).collect() };
    let chain = adversary_matrix(mdp, &theta);
    let slip = certificate.max_violation(&chain, spec);
    if slip > 1e-9 {
        log::warn!("certificate residual {slip:e} after cleaning θ");
    }
    finish(mdp, theta, SynthesisMode::EpsPrivate, sol.iterations, sol.max_violation, Some(certificate))
}

/// The ε-private LP itself, exposed for dumping.
pub fn eps_private_lp(mdp: &Mdp, spec: &PrivacySpec, floor: f64) -> LinearProgram {
    let nm = mdp.n_states() * mdp.n_actions();
    let mut lp = occupancy_lp(mdp, 1 + mdp.n_states(), floor);
    add_certificate_rows(&mut lp, mdp, spec, nm, None);
    lp
}

pub(crate) fn check_spec(mdp: &Mdp, spec: &PrivacySpec) -> Result<()> {
    if spec.n_states() != mdp.n_states() {
        return Err(Error::Dimension(format!(
            "privacy spec over {} states for a {}-state MDP",
            spec.n_states(),
            mdp.n_states()
        )));
    }
    Ok(())
}

/// Why the ε-private LP is infeasible: the smallest uniform relaxation `σ`
/// of the certificate rows that admits a solution, and the row (state)
/// binding at that relaxation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityDiagnosis {
    pub epsilon: f64,
    pub sigma: f64,
    pub tightest_state: usize,
}

impl std::fmt::Display for InfeasibilityDiagnosis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "no policy keeps the safe belief set invariant at epsilon = {}; the certificate row of state {} \
             is violated by at least {:.6e} (relax epsilon)",
            self.epsilon, self.tightest_state, self.sigma
        )
    }
}

pub fn diagnose_eps_infeasibility(mdp: &Mdp, spec: &PrivacySpec, opts: &SynthesisOptions) -> Result<InfeasibilityDiagnosis> {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let nm = n * m;
    let sigma = nm + 1 + n;
    let mut lp = occupancy_lp(mdp, 2 + n, opts.theta_floor);
    lp.c.iter_mut().for_each(|c| *c = 0.0);
    lp.c[sigma] = 1.0;
    add_certificate_rows(&mut lp, mdp, spec, nm, Some(sigma));
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("diagnosis LP ended with {:?}", sol.status)));
    }
    let first_cert_row = lp.a_ub.len() - n;
    let mut tightest = (f64::NEG_INFINITY, 0);
    for j in 0..n {
        let row = &lp.a_ub[first_cert_row + j];
        // value without the σ column
        let lhs: f64 = row.iter().zip(&sol.x).enumerate().filter(|(k, _)| *k != sigma).map(|(_, (a, x))| a * x).sum();
        let excess = lhs - spec.epsilon();
        if excess > tightest.0 + 1e-12 {
            tightest = (excess, j);
        }
    }
    Ok(InfeasibilityDiagnosis { epsilon: spec.epsilon(), sigma: sol.x[sigma], tightest_state: tightest.1 })
}
