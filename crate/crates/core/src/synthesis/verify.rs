//! Invariance of the safe belief set `{b : A_s b ≤ ε}` under one adversary
//! step, decided two ways: directly by the worst-case LP, and by searching
//! for a dual certificate `(z, β)`.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::adversary::Belief;
use crate::error::{Error, Result};
use crate::mdp::{Distribution, MarkovChain, OPTIMIZATION_TOL};
use crate::metrics::PrivacySpec;
use crate::optim::{solve_lp, LinearProgram, LpStatus};

/// Dual certificate of invariance: for every state `j`,
/// `ε z − A_s(j) z + c_j + β_j ≤ ε` with `c_j = Σ_{i ∈ S_s} M_adv(j, i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub z: f64,
    pub beta: Vec<f64>,
}

impl Certificate {
    /// Largest violation of the certificate rows (and of `z, β ≥ 0`).
    pub fn max_violation(&self, chain: &MarkovChain, spec: &PrivacySpec) -> f64 {
        let c = secret_inflow(chain, spec);
        let sel = spec.selector();
        let eps = spec.epsilon();
        let mut worst = (-self.z).max(0.0);
        for j in 0..c.len() {
            let lhs = eps * self.z - sel[j] * self.z + c[j] + self.beta[j];
            worst = worst.max(lhs - eps).max(-self.beta[j]);
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InvarianceVerdict {
    /// Worst-case one-step secret mass from a safe belief.
    Invariant { worst_mass: f64 },
    /// A safe belief whose image carries `image_mass > ε` on the secrets.
    Escapable { witness: Belief, image_mass: f64 },
}

impl InvarianceVerdict {
    pub fn is_invariant(&self) -> bool {
        matches!(self, Self::Invariant { .. })
    }
}

/// `c_j = Σ_{i ∈ S_s} P(j, i)`: secret mass after one step from state `j`.
pub fn secret_inflow(chain: &MarkovChain, spec: &PrivacySpec) -> Array1<f64> {
    chain.matrix().dot(&spec.selector())
}

fn check_dims(chain: &MarkovChain, spec: &PrivacySpec) -> Result<()> {
    if chain.n() != spec.n_states() {
        return Err(Error::Dimension(format!(
            "{}-state chain with a {}-state privacy spec",
            chain.n(),
            spec.n_states()
        )));
    }
    Ok(())
}

/// Solves `max A_s Pᵀ b  s.t.  b ∈ Δ(S), A_s b ≤ ε` exactly. Invariant iff
/// the optimum is at most `ε + 1e-9`; otherwise the maximizer is returned.
pub fn verify_invariance(chain: &MarkovChain, spec: &PrivacySpec) -> Result<InvarianceVerdict> {
    check_dims(chain, spec)?;
    let c = secret_inflow(chain, spec);
    let mut lp = LinearProgram::new(c.iter().map(|v| -v).collect());
    lp.add_eq(vec![1.0; c.len()], 1.0);
    lp.add_ub(spec.selector().to_vec(), spec.epsilon());
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("invariance LP ended with {:?}", sol.status)));
    }
    let worst_mass = -sol.objective;
    if worst_mass <= spec.epsilon() + OPTIMIZATION_TOL {
        return Ok(InvarianceVerdict::Invariant { worst_mass });
    }
    let mut b = Array1::from(sol.x);
    b.mapv_inplace(|v| v.max(0.0));
    let total = b.sum();
    b /= total;
    let image_mass = c.dot(&b);
    Ok(InvarianceVerdict::Escapable { witness: Distribution::computed(b)?, image_mass })
}

/// Searches for a certificate with the smallest `z`. Returns `None` iff the
/// certificate rows are infeasible.
pub fn theorem1_certificate(chain: &MarkovChain, spec: &PrivacySpec) -> Result<Option<Certificate>> {
    check_dims(chain, spec)?;
    let n = chain.n();
    let c = secret_inflow(chain, spec);
    let sel = spec.selector();
    let eps = spec.epsilon();
    // variables: z, beta_1..beta_n
    let mut obj = vec![0.0; n + 1];
    obj[0] = 1.0;
    let mut lp = LinearProgram::new(obj);
    for j in 0..n {
        let mut row = vec![0.0; n + 1];
        row[0] = eps - sel[j];
        row[1 + j] = 1.0;
        lp.add_ub(row, eps - c[j]);
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some(Certificate { z: sol.x[0].max(0.0), beta: sol.x[1..].iter().map(|v| v.max(0.0)).collect() })),
        LpStatus::Infeasible => Ok(None),
        other => Err(Error::Solver(format!("certificate LP ended with {other:?}"))),
    }
}
