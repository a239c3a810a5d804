//! Bayesian localization adversary: belief updates from observed cloak
//! statistics, the adversary chain `M_adv`, and its trajectories.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::mdp::{self, check_simplex, Distribution, MarkovChain, Mdp, OccupancyMeasure, COMPUTATION_TOL, CONSTRUCTION_TOL};

/// Adversary posterior over states.
pub type Belief = Distribution;

/// Probability of observing each cloak.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution(Array1<f64>);

impl ActionDistribution {
    pub fn new(pa: Array1<f64>) -> Result<Self> {
        check_simplex(&pa, CONSTRUCTION_TOL, "action distribution")?;
        Ok(Self(pa))
    }

    pub(crate) fn new_computed(pa: Array1<f64>) -> Result<Self> {
        check_simplex(&pa, COMPUTATION_TOL, "action distribution")?;
        Ok(Self(pa))
    }

    /// `p̂(a) = Σ_s θ(s, a)`.
    pub fn from_theta(theta: &OccupancyMeasure) -> Self {
        Self(theta.action_marginal())
    }

    pub fn point(m: usize, a: usize) -> Self {
        let mut pa = Array1::zeros(m);
        pa[a] = 1.0;
        Self(pa)
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }
}

/// `b'(q') = Σ_a pa(a) Σ_q T(q, a, q') b(q)`.
pub fn belief_update(mdp: &Mdp, b: &Belief, pa: &ActionDistribution) -> Result<Belief> {
    let (b, pa) = (b.as_array(), pa.as_array());
    if b.len() != mdp.n_states() || pa.len() != mdp.n_actions() {
        return Err(Error::Dimension(format!(
            "belief {} / action distribution {} for a ({}, {}) MDP",
            b.len(),
            pa.len(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    let mut next = Array1::zeros(b.len());
    for (a, &w) in pa.iter().enumerate() {
        if w != 0.0 {
            next.scaled_add(w, &mdp.transition(a).t().dot(b));
        }
    }
    Distribution::computed(next)
}

/// `M_adv = Σ_a θ_a T[a]` with `θ_a = Σ_s θ(s, a)`; the returned chain
/// starts from the uniform belief.
pub fn adversary_matrix(mdp: &Mdp, theta: &OccupancyMeasure) -> MarkovChain {
    adversary_matrix_from_weights(mdp, theta.action_marginal().as_slice().unwrap_or(&[]))
}

pub(crate) fn adversary_matrix_from_weights(mdp: &Mdp, weights: &[f64]) -> MarkovChain {
    let n = mdp.n_states();
    let mut m = Array2::zeros((n, n));
    for (a, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            m.scaled_add(w, mdp.transition(a));
        }
    }
    // Renormalize rows to absorb roundoff from the action weights.
    for mut row in m.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    MarkovChain::from_matrix(m).expect("convex combination of stochastic matrices is stochastic")
}

/// `[b0, b1, ..., b_horizon]` with `b_{t+1} = Pᵀ b_t`.
pub fn belief_trajectory(chain: &MarkovChain, b0: &Belief, horizon: usize) -> Result<Vec<Belief>> {
    if b0.len() != chain.n() {
        return Err(Error::Dimension(format!("belief of length {} for {}-state chain", b0.len(), chain.n())));
    }
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(b0.clone());
    let mut b = b0.as_array().clone();
    for _ in 0..horizon {
        b = chain.step(&b);
        out.push(Distribution::computed(b.clone())?);
    }
    Ok(out)
}

/// Fixed point `b∞ = M_advᵀ b∞` of an ergodic adversary chain.
pub fn stationary_belief(chain: &MarkovChain) -> Result<Belief> {
    mdp::stationary_distribution(chain)
}

/// Propagates many beliefs at once: column `k` of `beliefs` becomes
/// `Pᵀ b_k`.
pub fn propagate_columns(chain: &MarkovChain, beliefs: &Array2<f64>) -> Array2<f64> {
    chain.matrix().t().dot(beliefs)
}
