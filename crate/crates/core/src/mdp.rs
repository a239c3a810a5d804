//! MDP and Markov-chain types, the policy-induced chain, stationary
//! distributions, ergodicity and unichain checks, average cost, and
//! Monte-Carlo simulation.
//!
//! Every `T[a]` is a complete row-stochastic matrix. For an action that is
//! not available in state `s`, row `s` of `T[a]` is the self-loop `e_s` and
//! `u(s, a)` is the large penalty `ū`; optimization keeps those pairs out
//! with the hard constraint `θ(s, a) = 0`.
//!
//! Tolerances: `1e-12` for validating constructed data, `1e-10` for
//! computed distributions, `1e-9` for optimization residuals.

use std::collections::VecDeque;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub const CONSTRUCTION_TOL: f64 = 1e-12;
pub const COMPUTATION_TOL: f64 = 1e-10;
pub const OPTIMIZATION_TOL: f64 = 1e-9;

/// Multiplier applied to the largest available utility to obtain `ū`.
pub const U_BAR_FACTOR: f64 = 1e3;

/// Mass below which a state counts as unvisited when extracting a policy.
pub const ZERO_MASS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMeta {
    pub label: String,
    pub lat: f64,
    pub lon: f64,
    /// Square meters.
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionMeta {
    pub label: String,
    pub lat: f64,
    pub lon: f64,
    /// Meters.
    pub radius: f64,
}

pub(crate) fn check_simplex(p: &Array1<f64>, tol: f64, what: &str) -> Result<()> {
    if p.iter().any(|v| !v.is_finite() || *v < -tol) {
        return Err(Error::InvalidProbability(format!("{what} has a negative or non-finite entry")));
    }
    let sum = p.sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::InvalidProbability(format!("{what} sums to {sum}")));
    }
    Ok(())
}

fn check_stochastic(m: &Array2<f64>, tol: f64, what: &str) -> Result<()> {
    for (i, row) in m.rows().into_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidProbability(format!("{what} row {i} has a negative or non-finite entry")));
        }
        let sum = row.sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvalidProbability(format!("{what} row {i} sums to {sum}")));
        }
    }
    Ok(())
}

/// A finite MDP `(S, A, T, p0, u)` with per-state action availability.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<Array2<f64>>,
    available: Vec<Vec<usize>>,
    p0: Array1<f64>,
    utility: Array2<f64>,
    state_meta: Option<Vec<StateMeta>>,
    action_meta: Option<Vec<ActionMeta>>,
}

impl Mdp {
    /// Validates and wraps fully specified data.
    pub fn new(
        transition: Vec<Array2<f64>>,
        available: Vec<Vec<usize>>,
        p0: Array1<f64>,
        utility: Array2<f64>,
    ) -> Result<Self> {
        let n_actions = transition.len();
        let n_states = p0.len();
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidModel("an MDP needs at least one state and one action".into()));
        }
        if available.len() != n_states {
            return Err(Error::Dimension(format!("{} availability sets for {n_states} states", available.len())));
        }
        if utility.dim() != (n_states, n_actions) {
            return Err(Error::Dimension(format!(
                "utility is {:?}, expected ({n_states}, {n_actions})",
                utility.dim()
            )));
        }
        for (a, t) in transition.iter().enumerate() {
            if t.dim() != (n_states, n_states) {
                return Err(Error::Dimension(format!("T[{a}] is {:?}", t.dim())));
            }
            check_stochastic(t, CONSTRUCTION_TOL, &format!("T[{a}]"))?;
        }
        let mut available = available;
        for (s, acts) in available.iter_mut().enumerate() {
            acts.sort_unstable();
            acts.dedup();
            if acts.is_empty() {
                return Err(Error::InvalidModel(format!("state {s} has no available action")));
            }
            if let Some(&a) = acts.iter().find(|a| **a >= n_actions) {
                return Err(Error::Dimension(format!("state {s} lists action {a} of {n_actions}")));
            }
        }
        check_simplex(&p0, CONSTRUCTION_TOL, "p0")?;
        if utility.iter().any(|u| !u.is_finite()) {
            return Err(Error::InvalidModel("utility must be finite".into()));
        }

        let mdp = Self { n_states, n_actions, transition, available, p0, utility, state_meta: None, action_meta: None };
        let max_avail = mdp.max_available_utility();
        let mut u_bar = None;
        for s in 0..n_states {
            for a in 0..n_actions {
                if mdp.is_available(s, a) {
                    continue;
                }
                let row = mdp.transition[a].row(s);
                if row.iter().enumerate().any(|(j, v)| (if j == s { 1.0 } else { 0.0 } - v).abs() > CONSTRUCTION_TOL) {
                    return Err(Error::InvalidModel(format!(
                        "T[{a}] row {s} must be the self-loop completion row (action unavailable)"
                    )));
                }
                let u = mdp.utility[[s, a]];
                match u_bar {
                    None => u_bar = Some(u),
                    Some(prev) if prev != u => {
                        return Err(Error::InvalidModel("unavailable pairs must share a single penalty utility".into()))
                    }
                    _ => {}
                }
                if u <= max_avail {
                    return Err(Error::InvalidModel(format!(
                        "penalty utility {u} must exceed the largest available utility {max_avail}"
                    )));
                }
            }
        }
        Ok(mdp)
    }

    /// Builds an MDP from rows given only for available pairs: unavailable
    /// rows become self-loops and unavailable utilities become
    /// `ū = 1000 · max available utility` (or `u_bar` when supplied).
    pub fn with_completion(
        transition: Vec<Array2<f64>>,
        available: Vec<Vec<usize>>,
        p0: Array1<f64>,
        utility: Array2<f64>,
        u_bar: Option<f64>,
    ) -> Result<Self> {
        let n = p0.len();
        let m = transition.len();
        if available.len() != n || utility.dim() != (n, m) || transition.iter().any(|t| t.dim() != (n, n)) {
            return Err(Error::Dimension("inconsistent MDP dimensions".into()));
        }
        let mut is_avail = vec![vec![false; m]; n];
        for (s, acts) in available.iter().enumerate() {
            for &a in acts {
                if a >= m {
                    return Err(Error::Dimension(format!("state {s} lists action {a} of {m}")));
                }
                is_avail[s][a] = true;
            }
        }
        let max_avail = (0..n)
            .flat_map(|s| (0..m).map(move |a| (s, a)))
            .filter(|&(s, a)| is_avail[s][a])
            .map(|(s, a)| utility[[s, a]])
            .fold(f64::NEG_INFINITY, f64::max);
        let u_bar = u_bar.unwrap_or_else(|| {
            if max_avail > 0.0 {
                U_BAR_FACTOR * max_avail
            } else {
                // Nonpositive utilities: ū must still dominate.
                max_avail.abs() * U_BAR_FACTOR + U_BAR_FACTOR
            }
        });
        let mut transition = transition;
        let mut utility = utility;
        for s in 0..n {
            for a in 0..m {
                if !is_avail[s][a] {
                    let mut row = transition[a].row_mut(s);
                    row.fill(0.0);
                    row[s] = 1.0;
                    utility[[s, a]] = u_bar;
                }
            }
        }
        Self::new(transition, available, p0, utility)
    }

    pub fn with_meta(mut self, states: Option<Vec<StateMeta>>, actions: Option<Vec<ActionMeta>>) -> Result<Self> {
        if states.as_ref().is_some_and(|v| v.len() != self.n_states) {
            return Err(Error::Dimension("state_meta length".into()));
        }
        if actions.as_ref().is_some_and(|v| v.len() != self.n_actions) {
            return Err(Error::Dimension("action_meta length".into()));
        }
        self.state_meta = states;
        self.action_meta = actions;
        Ok(self)
    }

    pub fn with_p0(mut self, p0: Array1<f64>) -> Result<Self> {
        if p0.len() != self.n_states {
            return Err(Error::Dimension("p0 length".into()));
        }
        check_simplex(&p0, CONSTRUCTION_TOL, "p0")?;
        self.p0 = p0;
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn transition(&self, action: usize) -> &Array2<f64> {
        &self.transition[action]
    }

    pub fn transitions(&self) -> &[Array2<f64>] {
        &self.transition
    }

    pub fn available(&self, state: usize) -> &[usize] {
        &self.available[state]
    }

    pub fn availability(&self) -> &[Vec<usize>] {
        &self.available
    }

    pub fn is_available(&self, state: usize, action: usize) -> bool {
        self.available[state].binary_search(&action).is_ok()
    }

    pub fn p0(&self) -> &Array1<f64> {
        &self.p0
    }

    pub fn utility(&self) -> &Array2<f64> {
        &self.utility
    }

    pub fn state_meta(&self) -> Option<&[StateMeta]> {
        self.state_meta.as_deref()
    }

    pub fn action_meta(&self) -> Option<&[ActionMeta]> {
        self.action_meta.as_deref()
    }

    pub fn state_label(&self, s: usize) -> String {
        match &self.state_meta {
            Some(meta) => meta[s].label.clone(),
            None => format!("s{}", s + 1),
        }
    }

    pub fn action_label(&self, a: usize) -> String {
        match &self.action_meta {
            Some(meta) => meta[a].label.clone(),
            None => format!("a{}", a + 1),
        }
    }

    pub fn max_available_utility(&self) -> f64 {
        (0..self.n_states)
            .flat_map(|s| self.available[s].iter().map(move |&a| (s, a)))
            .map(|(s, a)| self.utility[[s, a]])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The penalty utility of unavailable pairs, if any pair is unavailable.
    pub fn u_bar(&self) -> Option<f64> {
        (0..self.n_states)
            .flat_map(|s| (0..self.n_actions).map(move |a| (s, a)))
            .find(|&(s, a)| !self.is_available(s, a))
            .map(|(s, a)| self.utility[[s, a]])
    }

    /// Number of deterministic stationary policies, saturating.
    pub fn deterministic_policy_count(&self) -> u128 {
        self.available.iter().fold(1u128, |acc, a| acc.saturating_mul(a.len() as u128))
    }
}

/// Stationary randomized policy `μ(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy(Array2<f64>);

impl Policy {
    pub fn new(mu: Array2<f64>, mdp: &Mdp) -> Result<Self> {
        if mu.dim() != (mdp.n_states, mdp.n_actions) {
            return Err(Error::Dimension(format!(
                "policy is {:?}, MDP is ({}, {})",
                mu.dim(),
                mdp.n_states,
                mdp.n_actions
            )));
        }
        check_stochastic(&mu, CONSTRUCTION_TOL, "policy")?;
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                if mu[[s, a]] > 0.0 && !mdp.is_available(s, a) {
                    return Err(Error::UnavailableAction { state: s, action: a });
                }
            }
        }
        Ok(Self(mu))
    }

    /// Uniform over `A(s)` in every state.
    pub fn uniform(mdp: &Mdp) -> Self {
        let mut mu = Array2::zeros((mdp.n_states, mdp.n_actions));
        for s in 0..mdp.n_states {
            let k = mdp.available[s].len() as f64;
            for &a in &mdp.available[s] {
                mu[[s, a]] = 1.0 / k;
            }
        }
        Self(mu)
    }

    /// One action per state.
    pub fn deterministic(mdp: &Mdp, choice: &[usize]) -> Result<Self> {
        if choice.len() != mdp.n_states {
            return Err(Error::Dimension("one action per state required".into()));
        }
        let mut mu = Array2::zeros((mdp.n_states, mdp.n_actions));
        for (s, &a) in choice.iter().enumerate() {
            if a >= mdp.n_actions || !mdp.is_available(s, a) {
                return Err(Error::UnavailableAction { state: s, action: a });
            }
            mu[[s, a]] = 1.0;
        }
        Ok(Self(mu))
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.0[[s, a]]
    }
}

/// Row-stochastic transition matrix plus an initial distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    p: Array2<f64>,
    init: Array1<f64>,
}

impl MarkovChain {
    pub fn new(p: Array2<f64>, init: Array1<f64>) -> Result<Self> {
        let n = init.len();
        if n == 0 || p.dim() != (n, n) {
            return Err(Error::Dimension(format!("chain matrix {:?} with {n}-state init", p.dim())));
        }
        check_stochastic(&p, CONSTRUCTION_TOL, "chain")?;
        check_simplex(&init, CONSTRUCTION_TOL, "initial distribution")?;
        Ok(Self { p, init })
    }

    /// Chain with a uniform initial distribution.
    pub fn from_matrix(p: Array2<f64>) -> Result<Self> {
        let n = p.nrows();
        Self::new(p, Array1::from_elem(n, 1.0 / n.max(1) as f64))
    }

    pub fn n(&self) -> usize {
        self.init.len()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.p
    }

    pub fn init(&self) -> &Array1<f64> {
        &self.init
    }

    /// One step of `p ↦ Pᵀ p`.
    pub fn step(&self, p: &Array1<f64>) -> Array1<f64> {
        self.p.t().dot(p)
    }
}

/// Probability vector over states.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Array1<f64>);

impl Distribution {
    pub fn new(p: Array1<f64>) -> Result<Self> {
        check_simplex(&p, CONSTRUCTION_TOL, "distribution")?;
        Ok(Self(p))
    }

    /// Accepts computed vectors at the looser computation tolerance.
    pub(crate) fn computed(p: Array1<f64>) -> Result<Self> {
        check_simplex(&p, COMPUTATION_TOL, "computed distribution")?;
        Ok(Self(p))
    }

    pub fn uniform(n: usize) -> Self {
        Self(Array1::from_elem(n, 1.0 / n as f64))
    }

    pub fn point(n: usize, s: usize) -> Self {
        let mut p = Array1::zeros(n);
        p[s] = 1.0;
        Self(p)
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array1<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Joint stationary state-action distribution `θ(s, a) = p∞(s) μ(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure(Array2<f64>);

impl OccupancyMeasure {
    pub fn new(theta: Array2<f64>, mdp: &Mdp) -> Result<Self> {
        if theta.dim() != (mdp.n_states, mdp.n_actions) {
            return Err(Error::Dimension(format!("theta is {:?}", theta.dim())));
        }
        if theta.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidProbability("theta has a negative or non-finite entry".into()));
        }
        let sum = theta.sum();
        if (sum - 1.0).abs() > COMPUTATION_TOL {
            return Err(Error::InvalidProbability(format!("theta sums to {sum}")));
        }
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                if theta[[s, a]] > 0.0 && !mdp.is_available(s, a) {
                    return Err(Error::UnavailableAction { state: s, action: a });
                }
            }
        }
        Ok(Self(theta))
    }

    /// Cleans an LP solution: roundoff negatives down to `-1e-9` and all
    /// unavailable pairs become 0, then the total is renormalized.
    pub fn from_lp(theta: Array2<f64>, mdp: &Mdp) -> Result<Self> {
        let mut theta = theta;
        for ((s, a), v) in theta.indexed_iter_mut() {
            if !v.is_finite() || *v < -OPTIMIZATION_TOL {
                return Err(Error::InvalidProbability(format!("theta({s},{a}) = {v}")));
            }
            if *v < 0.0 || !mdp.is_available(s, a) {
                *v = 0.0;
            }
        }
        let total = theta.sum();
        if total <= 0.0 {
            return Err(Error::InvalidProbability("theta has no mass".into()));
        }
        theta.mapv_inplace(|v| v / total);
        Self::new(theta, mdp)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    /// State marginal `Σ_a θ(s, a)`.
    pub fn state_marginal(&self) -> Array1<f64> {
        self.0.sum_axis(ndarray::Axis(1))
    }

    /// Action marginal `θ_a = Σ_s θ(s, a)`.
    pub fn action_marginal(&self) -> Array1<f64> {
        self.0.sum_axis(ndarray::Axis(0))
    }

    /// Largest violation of the occupancy balance
    /// `Σ_a θ(s', a) = Σ_{s,a} θ(s, a) T(s, a, s')`.
    pub fn balance_residual(&self, mdp: &Mdp) -> f64 {
        let marginal = self.state_marginal();
        let mut inflow = Array1::<f64>::zeros(mdp.n_states);
        for a in 0..mdp.n_actions {
            inflow += &mdp.transition[a].t().dot(&self.0.column(a));
        }
        marginal.iter().zip(inflow.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

/// `M_μ(s, s') = Σ_a μ(s, a) T(s, a, s')`; the chain starts from `p0`.
pub fn induce_chain(mdp: &Mdp, policy: &Policy) -> Result<MarkovChain> {
    let mu = policy.matrix();
    if mu.dim() != (mdp.n_states, mdp.n_actions) {
        return Err(Error::Dimension(format!("policy is {:?}", mu.dim())));
    }
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            if mu[[s, a]] > 0.0 && !mdp.is_available(s, a) {
                return Err(Error::UnavailableAction { state: s, action: a });
            }
        }
    }
    let n = mdp.n_states;
    let mut m = Array2::zeros((n, n));
    for a in 0..mdp.n_actions {
        let t = &mdp.transition[a];
        for s in 0..n {
            let w = mu[[s, a]];
            if w != 0.0 {
                m.row_mut(s).scaled_add(w, &t.row(s));
            }
        }
    }
    MarkovChain::new(m, mdp.p0.clone())
}

/// True iff the transition graph (edges with positive probability) is
/// strongly connected and aperiodic.
///
/// The period is the gcd of `level(u) + 1 - level(v)` over all edges,
/// with BFS levels from state 0.
pub fn check_ergodic(chain: &MarkovChain) -> bool {
    let p = chain.matrix();
    let n = chain.n();
    let reach = |forward: bool| -> Vec<Option<usize>> {
        let mut level = vec![None; n];
        level[0] = Some(0);
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            let lu = level[u].unwrap_or(0);
            for v in 0..n {
                let w = if forward { p[[u, v]] } else { p[[v, u]] };
                if w > 0.0 && level[v].is_none() {
                    level[v] = Some(lu + 1);
                    queue.push_back(v);
                }
            }
        }
        level
    };
    let fwd = reach(true);
    if fwd.iter().any(Option::is_none) || reach(false).iter().any(Option::is_none) {
        return false;
    }
    let mut g = 0usize;
    for u in 0..n {
        for v in 0..n {
            if p[[u, v]] > 0.0 {
                let (lu, lv) = (fwd[u].unwrap_or(0), fwd[v].unwrap_or(0));
                g = gcd(g, (lu + 1).abs_diff(lv));
            }
        }
    }
    g == 1
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Unique stationary distribution of an ergodic chain.
///
/// Solves `(Pᵀ - I) p = 0` with the last equation replaced by `Σ p = 1`;
/// the result is checked against `‖Pᵀp - p‖₁ ≤ 1e-10`.
pub fn stationary_distribution(chain: &MarkovChain) -> Result<Distribution> {
    if !check_ergodic(chain) {
        return Err(Error::NotErgodic("chain is reducible or periodic".into()));
    }
    let n = chain.n();
    let mut a = chain.matrix().t().to_owned();
    for i in 0..n {
        a[[i, i]] -= 1.0;
    }
    a.row_mut(n - 1).fill(1.0);
    let mut rhs = Array1::zeros(n);
    rhs[n - 1] = 1.0;
    let mut p = linalg::solve(&a, &rhs).ok_or_else(|| Error::NotErgodic("singular balance system".into()))?;
    // Roundoff can leave -1e-17 entries on states with tiny mass.
    p.mapv_inplace(|v| if v < 0.0 && v > -COMPUTATION_TOL { 0.0 } else { v });
    let residual = linalg::l1_distance(&chain.step(&p), &p);
    if residual > COMPUTATION_TOL {
        return Err(Error::Solver(format!("stationary residual {residual:e}")));
    }
    Distribution::computed(p)
}

/// Power iteration `p ← Pᵀp` from the uniform vector until successive
/// iterates differ by at most `tol` in L1. Kept as an independent
/// cross-check of [`stationary_distribution`]; periodic or reducible chains
/// typically exhaust `max_iter`.
pub fn power_iteration(chain: &MarkovChain, tol: f64, max_iter: usize) -> Result<Distribution> {
    let n = chain.n();
    let mut p = Array1::from_elem(n, 1.0 / n as f64);
    for _ in 0..max_iter {
        let next = chain.step(&p);
        let delta = linalg::l1_distance(&next, &p);
        p = next;
        if delta <= tol {
            let s = p.sum();
            return Distribution::computed(p / s);
        }
    }
    Err(Error::NotErgodic(format!("power iteration did not converge in {max_iter} steps")))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnichainVerdict {
    /// Every deterministic policy induces an ergodic chain.
    Unichain { checked: u128 },
    /// Action per state of a policy whose chain is not ergodic.
    NotUnichain { witness: Vec<usize> },
    BudgetExceeded { required: u128 },
}

/// Decides the unichain property by enumerating deterministic policies.
///
/// Deterministic policies suffice: the transition graph of any randomized
/// policy contains, on the same vertex set, the graph of a deterministic
/// policy built from its support. Adding edges preserves strong
/// connectivity and can only shrink the gcd of cycle lengths, so ergodicity
/// of every deterministic chain implies it for every randomized one.
pub fn check_unichain_exhaustive(mdp: &Mdp, budget: u128) -> UnichainVerdict {
    let required = mdp.deterministic_policy_count();
    if required > budget {
        return UnichainVerdict::BudgetExceeded { required };
    }
    let n = mdp.n_states;
    let mut digits = vec![0usize; n];
    let mut checked = 0u128;
    loop {
        let choice: Vec<usize> = digits.iter().enumerate().map(|(s, &k)| mdp.available[s][k]).collect();
        let mut m = Array2::zeros((n, n));
        for (s, &a) in choice.iter().enumerate() {
            m.row_mut(s).assign(&mdp.transition[a].row(s));
        }
        let chain = MarkovChain { p: m, init: mdp.p0.clone() };
        checked += 1;
        if !check_ergodic(&chain) {
            return UnichainVerdict::NotUnichain { witness: choice };
        }
        // odometer
        let mut s = 0;
        loop {
            if s == n {
                return UnichainVerdict::Unichain { checked };
            }
            digits[s] += 1;
            if digits[s] < mdp.available[s].len() {
                break;
            }
            digits[s] = 0;
            s += 1;
        }
    }
}

/// `v = Σ θ(s, a) u(s, a)`.
pub fn average_cost(theta: &OccupancyMeasure, mdp: &Mdp) -> f64 {
    (theta.matrix() * mdp.utility()).sum()
}

/// Splits `θ` into `(μ, p∞)` with `μ(s, a) = θ(s, a) / p∞(s)`. States with
/// `p∞(s) ≤ 1e-12` get the uniform row over `A(s)`.
pub fn policy_from_theta(theta: &OccupancyMeasure, mdp: &Mdp) -> Result<(Policy, Distribution)> {
    let p = theta.state_marginal();
    let mut mu = Array2::zeros((mdp.n_states, mdp.n_actions));
    for s in 0..mdp.n_states {
        if p[s] > ZERO_MASS {
            let mut row = mu.row_mut(s);
            row.assign(&theta.matrix().row(s));
            row /= p[s];
            // exact row sum despite division roundoff
            let sum = row.sum();
            row /= sum;
        } else {
            let k = mdp.available[s].len() as f64;
            for &a in &mdp.available[s] {
                mu[[s, a]] = 1.0 / k;
            }
        }
    }
    Ok((Policy::new(mu, mdp)?, Distribution::computed(p)?))
}

/// `θ(s, a) = p∞(s) μ(s, a)`.
pub fn theta_from_policy(policy: &Policy, p_inf: &Distribution, mdp: &Mdp) -> Result<OccupancyMeasure> {
    let p = p_inf.as_array();
    if p.len() != mdp.n_states {
        return Err(Error::Dimension("p_inf length".into()));
    }
    let mut theta = policy.matrix().clone();
    for (s, mut row) in theta.rows_mut().into_iter().enumerate() {
        row *= p[s];
    }
    OccupancyMeasure::new(theta, mdp)
}

/// Samples `horizon` (state, action) pairs: `s0 ~ p0`, `a_t ~ μ(s_t, ·)`,
/// `s_{t+1} ~ T[a_t](s_t, ·)`. Reproducible for a given seed.
pub fn simulate(mdp: &Mdp, policy: &Policy, horizon: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(horizon);
    if horizon == 0 {
        return out;
    }
    let mut s = sample(&mut rng, mdp.p0.iter().copied());
    for _ in 0..horizon {
        let a = sample(&mut rng, policy.matrix().row(s).iter().copied());
        out.push((s, a));
        s = sample(&mut rng, mdp.transition[a].row(s).iter().copied());
    }
    out
}

/// Mean of `u(s_t, a_t)` along a trajectory.
pub fn empirical_cost(mdp: &Mdp, trajectory: &[(usize, usize)]) -> f64 {
    if trajectory.is_empty() {
        return 0.0;
    }
    trajectory.iter().map(|&(s, a)| mdp.utility[[s, a]]).sum::<f64>() / trajectory.len() as f64
}

pub(crate) fn sample<R: Rng, I: Iterator<Item = f64> + Clone>(rng: &mut R, weights: I) -> usize {
    let total: f64 = weights.clone().sum();
    let r = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if r < acc {
            return i;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::campus;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    fn chain(p: Array2<f64>) -> MarkovChain {
        MarkovChain::from_matrix(p).unwrap()
    }

    #[test]
    fn deterministic_policy_selects_rows() {
        let mdp = campus();
        let choice: Vec<usize> = (0..mdp.n_states()).map(|s| mdp.available(s)[0]).collect();
        let policy = Policy::deterministic(&mdp, &choice).unwrap();
        let m = induce_chain(&mdp, &policy).unwrap();
        for (s, &a) in choice.iter().enumerate() {
            assert_eq!(m.matrix().row(s), mdp.transition(a).row(s));
        }
    }

    #[test]
    fn campus_uniform_policy_row_s1() {
        // A(s1) = {a, e}; both move uniformly to {s1, s2, s3}.
        let mdp = campus();
        let m = induce_chain(&mdp, &Policy::uniform(&mdp)).unwrap();
        let expect = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 0.0, 0.0];
        for (x, y) in m.matrix().row(0).iter().zip(expect) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn unavailable_support_is_rejected() {
        let mdp = campus();
        let mut mu = Policy::uniform(&mdp).matrix().clone();
        mu[[0, 0]] = 0.0;
        mu[[0, 1]] = 0.5; // b is not available at s1
        assert!(matches!(Policy::new(mu, &mdp), Err(Error::UnavailableAction { state: 0, action: 1 })));
    }

    #[test]
    fn periodic_chain_is_rejected() {
        let c = chain(array![[0.0, 1.0], [1.0, 0.0]]);
        assert!(!check_ergodic(&c));
        assert!(matches!(stationary_distribution(&c), Err(Error::NotErgodic(_))));
    }

    #[test]
    fn symmetric_chain_is_uniform() {
        let c = chain(array![[0.5, 0.5], [0.5, 0.5]]);
        let p = stationary_distribution(&c).unwrap();
        assert!((p.as_array()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ergodicity_cases() {
        assert!(check_ergodic(&chain(array![[0.5, 0.5], [1.0, 0.0]])));
        // reducible: absorbing state
        assert!(!check_ergodic(&chain(array![[1.0, 0.0], [0.5, 0.5]])));
        // period 3
        assert!(!check_ergodic(&chain(array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])));
        // cycles of length 2 and 3 -> aperiodic
        assert!(check_ergodic(&chain(array![[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [1.0, 0.0, 0.0]])));
        let mdp = campus();
        assert!(check_ergodic(&induce_chain(&mdp, &Policy::uniform(&mdp)).unwrap()));
    }

    #[test]
    fn stationary_two_methods_agree_on_campus() {
        let mdp = campus();
        let c = induce_chain(&mdp, &Policy::uniform(&mdp)).unwrap();
        let dense = stationary_distribution(&c).unwrap();
        let power = power_iteration(&c, 1e-14, 100_000).unwrap();
        assert!(linalg::l1_distance(dense.as_array(), power.as_array()) < 1e-9);
    }

    #[test]
    fn unichain_enumeration() {
        let mdp = campus();
        assert_eq!(check_unichain_exhaustive(&mdp, 1_000), UnichainVerdict::Unichain { checked: 216 });
        assert_eq!(check_unichain_exhaustive(&mdp, 100), UnichainVerdict::BudgetExceeded { required: 216 });

        // single action, ergodic chain
        let single = Mdp::new(vec![array![[0.5, 0.5], [0.3, 0.7]]], vec![vec![0], vec![0]], array![1.0, 0.0], array![[1.0], [2.0]])
            .unwrap();
        assert!(matches!(check_unichain_exhaustive(&single, 10), UnichainVerdict::Unichain { checked: 1 }));

        // action 1 makes both states absorbing
        let split = Mdp::new(
            vec![array![[0.5, 0.5], [0.5, 0.5]], array![[1.0, 0.0], [0.0, 1.0]]],
            vec![vec![0, 1], vec![0, 1]],
            array![1.0, 0.0],
            array![[1.0, 1.0], [1.0, 1.0]],
        )
        .unwrap();
        match check_unichain_exhaustive(&split, 10) {
            UnichainVerdict::NotUnichain { witness } => assert!(witness.contains(&1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn average_cost_simple_cases() {
        let mdp = campus();
        let mut theta = Array2::zeros((6, 6));
        theta[[0, 4]] = 1.0;
        let t = OccupancyMeasure::new(theta, &mdp).unwrap();
        assert_eq!(average_cost(&t, &mdp), mdp.utility()[[0, 4]]);

        let mut theta = Array2::zeros((6, 6));
        theta[[0, 0]] = 0.5;
        theta[[0, 4]] = 0.5;
        let t = OccupancyMeasure::new(theta, &mdp).unwrap();
        let expect = 0.5 * (mdp.utility()[[0, 0]] + mdp.utility()[[0, 4]]);
        assert!((average_cost(&t, &mdp) - expect).abs() < 1e-12);
    }

    #[test]
    fn policy_from_theta_cases() {
        let mdp = campus();
        let mut theta = Array2::zeros((6, 6));
        theta[[1, 1]] = 0.5;
        theta[[1, 3]] = 0.5;
        let t = OccupancyMeasure::new(theta, &mdp).unwrap();
        let (mu, p) = policy_from_theta(&t, &mdp).unwrap();
        assert_eq!(mu.prob(1, 1), 0.5);
        assert_eq!(mu.prob(1, 3), 0.5);
        assert_eq!(p.as_array()[1], 1.0);
        // zero-mass s4 gets uniform over {b, d, f}
        for a in [1, 3, 5] {
            assert!((mu.prob(3, a) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn theta_roundtrip_on_campus() {
        let mdp = campus();
        let policy = Policy::uniform(&mdp);
        let p = stationary_distribution(&induce_chain(&mdp, &policy).unwrap()).unwrap();
        let theta = theta_from_policy(&policy, &p, &mdp).unwrap();
        assert!(theta.balance_residual(&mdp) < 1e-12);
        let (mu, p2) = policy_from_theta(&theta, &mdp).unwrap();
        assert!((&mu.matrix().clone() - policy.matrix()).iter().all(|d| d.abs() < 1e-10));
        assert!(linalg::l1_distance(p.as_array(), p2.as_array()) < 1e-12);
    }

    #[test]
    fn simulate_is_reproducible_and_deterministic() {
        let mdp = campus();
        let policy = Policy::uniform(&mdp);
        assert_eq!(simulate(&mdp, &policy, 500, 7), simulate(&mdp, &policy, 500, 7));
        assert!(simulate(&mdp, &policy, 0, 7).is_empty());

        let det = Mdp::new(
            vec![array![[0.0, 1.0], [1.0, 0.0]]],
            vec![vec![0], vec![0]],
            array![1.0, 0.0],
            array![[1.0], [2.0]],
        )
        .unwrap();
        let pol = Policy::uniform(&det);
        let traj = simulate(&det, &pol, 4, 1);
        assert_eq!(traj, vec![(0, 0), (1, 0), (0, 0), (1, 0)]);
        assert_eq!(traj, simulate(&det, &pol, 4, 99));
    }

    #[test]
    fn campus_simulation_frequencies_and_cost() {
        let mdp = campus();
        let policy = Policy::uniform(&mdp);
        let p = stationary_distribution(&induce_chain(&mdp, &policy).unwrap()).unwrap();
        let traj = simulate(&mdp, &policy, 100_000, 2024);
        let mut freq = Array1::<f64>::zeros(6);
        for &(s, _) in &traj {
            freq[s] += 1.0;
        }
        freq /= traj.len() as f64;
        assert!(linalg::l1_distance(&freq, p.as_array()) < 0.02);

        let theta = theta_from_policy(&policy, &p, &mdp).unwrap();
        let v = average_cost(&theta, &mdp);
        let mc = empirical_cost(&mdp, &traj);
        assert!((mc - v).abs() / v < 0.01, "{mc} vs {v}");
    }

    #[test]
    fn construction_rejects_bad_data() {
        let bad_row = Mdp::new(vec![array![[0.5, 0.6], [0.5, 0.5]]], vec![vec![0], vec![0]], array![1.0, 0.0], array![[1.0], [1.0]]);
        assert!(bad_row.is_err());
        let bad_p0 = Mdp::new(vec![array![[0.5, 0.5], [0.5, 0.5]]], vec![vec![0], vec![0]], array![0.7, 0.7], array![[1.0], [1.0]]);
        assert!(bad_p0.is_err());
        // unavailable pair without a self-loop completion row
        let bad_completion = Mdp::new(
            vec![array![[0.5, 0.5], [0.5, 0.5]], array![[0.5, 0.5], [0.0, 1.0]]],
            vec![vec![0], vec![0, 1]],
            array![1.0, 0.0],
            array![[1.0, 1e6], [1.0, 1.0]],
        );
        assert!(bad_completion.is_err());
        // penalty not dominating
        let bad_penalty = Mdp::new(
            vec![array![[0.5, 0.5], [0.5, 0.5]], array![[1.0, 0.0], [0.5, 0.5]]],
            vec![vec![0], vec![0, 1]],
            array![1.0, 0.0],
            array![[1.0, 0.5], [1.0, 1.0]],
        );
        assert!(bad_penalty.is_err());
    }

    fn random_mdp(n: usize, m: usize, seed: u64) -> Mdp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut available = Vec::new();
        for _ in 0..n {
            let mut acts: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.6)).collect();
            if acts.is_empty() {
                acts.push(rng.gen_range(0..m));
            }
            available.push(acts);
        }
        let transition = (0..m)
            .map(|_| {
                let mut t = Array2::from_shape_fn((n, n), |_| if rng.gen_bool(0.5) { rng.gen::<f64>() } else { 0.0 });
                for mut row in t.rows_mut() {
                    let k = rng.gen_range(0..n);
                    row[k] += 0.1;
                    let s = row.sum();
                    row /= s;
                }
                t
            })
            .collect();
        let utility = Array2::from_shape_fn((n, m), |_| rng.gen_range(1.0..10.0));
        let mut p0 = Array1::zeros(n);
        p0[0] = 1.0;
        Mdp::with_completion(transition, available, p0, utility, None).unwrap()
    }

    fn random_policy(mdp: &Mdp, seed: u64) -> Policy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mu = Array2::zeros((mdp.n_states(), mdp.n_actions()));
        for s in 0..mdp.n_states() {
            let w: Vec<f64> = mdp.available(s).iter().map(|_| rng.gen::<f64>() + 1e-3).collect();
            let total: f64 = w.iter().sum();
            for (&a, wi) in mdp.available(s).iter().zip(&w) {
                mu[[s, a]] = wi / total;
            }
            let sum = mu.row(s).sum();
            mu.row_mut(s).mapv_inplace(|v| v / sum);
        }
        Policy::new(mu, mdp).unwrap()
    }

    proptest! {
        #[test]
        fn induced_rows_are_stochastic(n in 1usize..7, m in 1usize..5, seed in any::<u64>()) {
            let mdp = random_mdp(n, m, seed);
            let policy = random_policy(&mdp, seed ^ 0x5eed);
            let c = induce_chain(&mdp, &policy).unwrap();
            for row in c.matrix().rows() {
                prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn stationary_residual_and_theta_marginals(n in 1usize..7, m in 1usize..5, seed in any::<u64>()) {
            let mdp = random_mdp(n, m, seed);
            let policy = random_policy(&mdp, seed.wrapping_add(1));
            let c = induce_chain(&mdp, &policy).unwrap();
            prop_assume!(check_ergodic(&c));
            let p = stationary_distribution(&c).unwrap();
            prop_assert!(linalg::l1_distance(&c.step(p.as_array()), p.as_array()) <= 1e-10);
            let theta = theta_from_policy(&policy, &p, &mdp).unwrap();
            let (mu, _) = policy_from_theta(&theta, &mdp).unwrap();
            for s in 0..n {
                if p.as_array()[s] > 1e-12 {
                    for a in 0..m {
                        prop_assert!((mu.prob(s, a) - policy.prob(s, a)).abs() <= 1e-10);
                    }
                }
            }
        }
    }
}
