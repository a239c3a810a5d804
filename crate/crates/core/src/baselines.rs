//! Greedy per-step obfuscation mechanisms `f_t : S → Δ(A)` and their
//! rollouts against the Bayesian adversary.
//!
//! At every step the user's true state distribution `p_t` and the
//! adversary's belief `b_t` are known; the mechanism induces the report
//! distribution `pa(a) = Σ_s p_t(s) f(a|s)`, the adversary updates to
//! `b_{t+1} = Σ_a pa(a) T[a]ᵀ b_t`, and the user moves to
//! `p_{t+1}(s') = Σ_{s,a} p_t(s) f(a|s) T(s, a, s')`.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::adversary::{belief_update, ActionDistribution, Belief};
use crate::error::{Error, Result};
use crate::mdp::{Distribution, Mdp, COMPUTATION_TOL};
use crate::metrics::DistanceMatrix;
use crate::optim::{maximize_concave, solve_lp, LinearEntropy, LinearProgram, LpStatus, DEFAULT_ITERATIONS};

/// Row-stochastic `f(a|s)` supported on `A(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism(Array2<f64>);

impl Mechanism {
    pub fn new(f: Array2<f64>, mdp: &Mdp) -> Result<Self> {
        if f.dim() != (mdp.n_states(), mdp.n_actions()) {
            return Err(Error::Dimension(format!("mechanism is {:?}", f.dim())));
        }
        for (s, row) in f.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidProbability(format!("mechanism row {s} has a negative entry")));
            }
            if (row.sum() - 1.0).abs() > COMPUTATION_TOL {
                return Err(Error::InvalidProbability(format!("mechanism row {s} sums to {}", row.sum())));
            }
            if let Some(a) = (0..mdp.n_actions()).find(|&a| row[a] > 0.0 && !mdp.is_available(s, a)) {
                return Err(Error::UnavailableAction { state: s, action: a });
            }
        }
        Ok(Self(f))
    }

    /// Uniform over `A(s)`.
    pub fn uniform(mdp: &Mdp) -> Self {
        Self(crate::mdp::Policy::uniform(mdp).matrix().clone())
    }

    /// Clips solver roundoff and renormalizes each row.
    fn from_solver(x: &[f64], mdp: &Mdp) -> Result<Self> {
        let (n, m) = (mdp.n_states(), mdp.n_actions());
        let mut f = Array2::from_shape_fn((n, m), |(s, a)| if mdp.is_available(s, a) { x[s * m + a].max(0.0) } else { 0.0 });
        for mut row in f.rows_mut() {
            let total = row.sum();
            row /= total;
        }
        Self::new(f, mdp)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }
}

/// One user step: `(p_{t+1}, pa)`.
pub fn step_user(mdp: &Mdp, p: &Distribution, f: &Mechanism) -> Result<(Distribution, ActionDistribution)> {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    if p.len() != n || f.matrix().dim() != (n, m) {
        return Err(Error::Dimension("user distribution or mechanism does not match the MDP".into()));
    }
    let p = p.as_array();
    let mut pa = Array1::zeros(m);
    let mut next = Array1::zeros(n);
    for s in 0..n {
        for a in 0..m {
            let w = p[s] * f.matrix()[[s, a]];
            if w != 0.0 {
                pa[a] += w;
                next.scaled_add(w, &mdp.transition(a).row(s));
            }
        }
    }
    Ok((Distribution::computed(next)?, ActionDistribution::new_computed(pa)?))
}

/// `G[q, (s, a)] = p(s) (T[a]ᵀ b)(q)`, so the posterior is `G · vec(f)`.
fn posterior_map(mdp: &Mdp, b: &Belief, p: &Distribution) -> Array2<f64> {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let pulled: Vec<Array1<f64>> = (0..m).map(|a| mdp.transition(a).t().dot(b.as_array())).collect();
    let mut g = Array2::zeros((n, n * m));
    for s in 0..n {
        let ps = p.as_array()[s];
        if ps == 0.0 {
            continue;
        }
        for a in mdp.available(s) {
            for q in 0..n {
                g[[q, s * m + a]] = ps * pulled[*a][q];
            }
        }
    }
    g
}

/// Polytope of mechanisms over `vec(f)` (row-major), with `extra` trailing
/// free variables.
fn mechanism_polytope(mdp: &Mdp, extra: usize) -> LinearProgram {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let d = n * m + extra;
    let mut lp = LinearProgram::feasibility(d);
    for s in 0..n {
        let mut row = vec![0.0; d];
        row[s * m..(s + 1) * m].fill(1.0);
        lp.add_eq(row, 1.0);
        for a in 0..m {
            if !mdp.is_available(s, a) {
                lp.set_bounds(s * m + a, 0.0, 0.0);
            }
        }
    }
    lp
}

fn check_inputs(mdp: &Mdp, b: &Belief, p: &Distribution) -> Result<()> {
    if b.len() != mdp.n_states() || p.len() != mdp.n_states() {
        return Err(Error::Dimension("belief or user distribution does not match the MDP".into()));
    }
    Ok(())
}

/// Maximizes the entropy of the adversary's next belief by conditional
/// gradient, starting from the uniform mechanism.
pub fn max_entropy_mechanism(mdp: &Mdp, b: &Belief, p: &Distribution) -> Result<Mechanism> {
    check_inputs(mdp, b, p)?;
    let g = posterior_map(mdp, b, p);
    let g_flat: Vec<f64> = g.iter().copied().collect();
    let f = LinearEntropy { g: &g_flat, rows: mdp.n_states() };
    let start: Vec<f64> = Mechanism::uniform(mdp).matrix().iter().copied().collect();
    let res = maximize_concave(&f, &mechanism_polytope(mdp, 0), Some(&start), DEFAULT_ITERATIONS)?;
    if !res.converged {
        log::debug!("entropy maximization stopped with gap {:.3e}", res.gap);
    }
    Mechanism::from_solver(&res.x, mdp)
}

/// Maximizes the adversary's expected inference error
/// `min_ŝ Σ_q b'(q) d(q, ŝ)` exactly through its epigraph LP.
pub fn max_inference_error_mechanism(mdp: &Mdp, b: &Belief, p: &Distribution, d: &DistanceMatrix) -> Result<Mechanism> {
    Ok(max_inference_error_lp(mdp, b, p, d)?.0)
}

/// The mechanism and its optimal value.
pub fn max_inference_error_lp(
    mdp: &Mdp,
    b: &Belief,
    p: &Distribution,
    d: &DistanceMatrix,
) -> Result<(Mechanism, f64)> {
    check_inputs(mdp, b, p)?;
    let n = mdp.n_states();
    if d.n() != n {
        return Err(Error::Dimension("distance matrix does not match the MDP".into()));
    }
    let g = posterior_map(mdp, b, p);
    let nm = g.ncols();
    let mut lp = mechanism_polytope(mdp, 1);
    lp.c[nm] = -1.0;
    lp.set_bounds(nm, f64::NEG_INFINITY, f64::INFINITY);
    // w ≤ Σ_q d(q, ŝ) (G f)(q) for every guess ŝ
    let dg = d.matrix().t().dot(&g);
    for guess in 0..n {
        let mut row: Vec<f64> = dg.row(guess).iter().map(|v| -v).collect();
        row.push(1.0);
        lp.add_ub(row, 0.0);
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("inference-error LP ended with {:?}", sol.status)));
    }
    Ok((Mechanism::from_solver(&sol.x[..nm], mdp)?, sol.x[nm]))
}

/// Minimizes expected quality loss `Σ p(s) f(a|s) u(s, a)` subject to
/// `b'(s) b(s') ≤ e^ε b'(s') b(s)` for every ordered pair of states.
pub fn dp_mechanism(mdp: &Mdp, b: &Belief, p: &Distribution, eps: f64) -> Result<Mechanism> {
    check_inputs(mdp, b, p)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
    }
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let g = posterior_map(mdp, b, p);
    let mut lp = mechanism_polytope(mdp, 0);
    for s in 0..n {
        for a in mdp.available(s) {
            lp.c[s * m + a] = p.as_array()[s] * mdp.utility()[[s, *a]];
        }
    }
    let bv = b.as_array();
    let scale = eps.exp();
    if scale.is_finite() {
        for s in 0..n {
            for t in 0..n {
                if s == t {
                    continue;
                }
                let row: Vec<f64> = (0..n * m).map(|k| g[[s, k]] * bv[t] - scale * g[[t, k]] * bv[s]).collect();
                if row.iter().any(|v| *v != 0.0) {
                    lp.add_ub(row, 0.0);
                }
            }
        }
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Mechanism::from_solver(&sol.x, mdp),
        LpStatus::Infeasible => Err(Error::Infeasible(format!(
            "no mechanism keeps every belief ratio within e^{eps} for this prior"
        ))),
        other => Err(Error::Solver(format!("(D,ε) LP ended with {other:?}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineKind {
    MaxEntropy,
    MaxInferenceError,
    DifferentialPrivacy { epsilon: f64 },
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::MaxEntropy => "max_entropy",
            Self::MaxInferenceError => "max_inference_error",
            Self::DifferentialPrivacy { .. } => "dp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// `b_0 ..= b_horizon`.
    pub beliefs: Vec<Belief>,
    /// `p_0 ..= p_horizon`.
    pub user: Vec<Distribution>,
    /// `f_0 .. f_{horizon-1}`.
    pub mechanisms: Vec<Mechanism>,
}

/// Runs a baseline for `horizon` steps. `distances` is required by
/// [`BaselineKind::MaxInferenceError`].
pub fn rollout(
    mdp: &Mdp,
    kind: BaselineKind,
    b0: &Belief,
    p0: &Distribution,
    horizon: usize,
    distances: Option<&DistanceMatrix>,
) -> Result<Rollout> {
    check_inputs(mdp, b0, p0)?;
    let mut out = Rollout { beliefs: vec![b0.clone()], user: vec![p0.clone()], mechanisms: Vec::with_capacity(horizon) };
    for t in 0..horizon {
        let (b, p) = (&out.beliefs[t], &out.user[t]);
        let f = match kind {
            BaselineKind::MaxEntropy => max_entropy_mechanism(mdp, b, p),
            BaselineKind::MaxInferenceError => {
                let d = distances.ok_or_else(|| Error::InvalidArgument("inference-error baseline needs distances".into()))?;
                max_inference_error_mechanism(mdp, b, p, d)
            }
            BaselineKind::DifferentialPrivacy { epsilon } => dp_mechanism(mdp, b, p, epsilon),
        }
        .map_err(|e| match e {
            Error::Infeasible(msg) => Error::Infeasible(format!("step {t}: {msg}")),
            other => other,
        })?;
        let (p_next, pa) = step_user(mdp, p, &f)?;
        let b_next = belief_update(mdp, b, &pa)?;
        out.user.push(p_next);
        out.beliefs.push(b_next);
        out.mechanisms.push(f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{campus, CAMPUS_SECRET};
    use crate::linalg::l1_distance;
    use crate::metrics::{entropy, expected_inference_error, max_dp_ratio, DistanceKind};
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mechanism(mdp: &Mdp, rng: &mut ChaCha8Rng) -> Mechanism {
        let mut f = Array2::zeros((mdp.n_states(), mdp.n_actions()));
        for s in 0..mdp.n_states() {
            let w: Vec<f64> = mdp.available(s).iter().map(|_| rng.gen::<f64>() + 1e-9).collect();
            let total: f64 = w.iter().sum();
            for (&a, wi) in mdp.available(s).iter().zip(&w) {
                f[[s, a]] = wi / total;
            }
            let sum = f.row(s).sum();
            f.row_mut(s).mapv_inplace(|v| v / sum);
        }
        Mechanism::new(f, mdp).unwrap()
    }

    fn posterior(mdp: &Mdp, b: &Belief, p: &Distribution, f: &Mechanism) -> Belief {
        let (_, pa) = step_user(mdp, p, f).unwrap();
        belief_update(mdp, b, &pa).unwrap()
    }

    #[test]
    fn deterministic_step() {
        let t = array![[0.0, 1.0], [1.0, 0.0]];
        let mdp = Mdp::new(vec![t], vec![vec![0]; 2], array![1.0, 0.0], array![[1.0], [1.0]]).unwrap();
        let f = Mechanism::uniform(&mdp);
        let (next, pa) = step_user(&mdp, &Distribution::point(2, 0), &f).unwrap();
        assert_eq!(next.as_array(), &array![0.0, 1.0]);
        assert_eq!(pa.as_array(), &array![1.0]);
    }

    #[test]
    fn uniform_preserved_on_doubly_stochastic() {
        let t1 = array![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
        let t2 = array![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let mdp = Mdp::new(vec![t1, t2], vec![vec![0, 1]; 3], array![1.0, 0.0, 0.0], Array2::ones((3, 2))).unwrap();
        let (next, _) = step_user(&mdp, &Distribution::uniform(3), &Mechanism::uniform(&mdp)).unwrap();
        assert!(l1_distance(next.as_array(), Distribution::uniform(3).as_array()) < 1e-15);
    }

    #[test]
    fn campus_step_matches_enumeration() {
        let mdp = campus();
        let f = Mechanism::uniform(&mdp);
        let (next, pa) = step_user(&mdp, &Distribution::new(mdp.p0().clone()).unwrap(), &f).unwrap();
        // from s1 with cloaks a, e at 1/2 each, moving uniformly to s1, s2, s3
        let mut expect_p = Array1::zeros(6);
        let mut expect_pa = Array1::zeros(6);
        for s in 0..6 {
            for a in 0..6 {
                for s2 in 0..6 {
                    let w = mdp.p0()[s] * f.matrix()[[s, a]] * mdp.transition(a)[[s, s2]];
                    expect_p[s2] += w;
                    expect_pa[a] += w;
                }
            }
        }
        assert!(l1_distance(next.as_array(), &expect_p) < 1e-15);
        assert!(l1_distance(pa.as_array(), &expect_pa) < 1e-15);
        assert!((next.as_array()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(pa.as_array()[0], 0.5);
    }

    #[test]
    fn single_action_mechanism_is_forced() {
        let t = array![[0.7, 0.3], [0.4, 0.6]];
        let mdp = Mdp::new(vec![t], vec![vec![0]; 2], array![1.0, 0.0], array![[1.0], [1.0]]).unwrap();
        let b = Distribution::uniform(2);
        let p = Distribution::uniform(2);
        assert_eq!(max_entropy_mechanism(&mdp, &b, &p).unwrap(), Mechanism::uniform(&mdp));
        let d = DistanceMatrix::new(array![[0.0, 3.0], [3.0, 0.0]]).unwrap();
        let (f, value) = max_inference_error_lp(&mdp, &b, &p, &d).unwrap();
        assert_eq!(f, Mechanism::uniform(&mdp));
        let post = posterior(&mdp, &b, &p, &f);
        let (expect, _) = expected_inference_error(&post, &d).unwrap();
        assert!((value - expect).abs() < 1e-12);
    }

    #[test]
    fn attainable_uniform_posterior() {
        // action 0 sends everything to state 0, action 1 to state 1
        let t0 = array![[1.0, 0.0], [1.0, 0.0]];
        let t1 = array![[0.0, 1.0], [0.0, 1.0]];
        let mdp = Mdp::new(vec![t0, t1], vec![vec![0, 1]; 2], array![1.0, 0.0], Array2::ones((2, 2))).unwrap();
        let f = max_entropy_mechanism(&mdp, &Distribution::point(2, 0), &Distribution::new(array![0.3, 0.7]).unwrap())
            .unwrap();
        let post = posterior(&mdp, &Distribution::point(2, 0), &Distribution::new(array![0.3, 0.7]).unwrap(), &f);
        assert!((entropy(&post) - 2f64.ln()).abs() < 1e-4);
    }

    #[test]
    fn zero_distances_give_zero_value() {
        let mdp = campus();
        let d = DistanceMatrix::new(Array2::zeros((6, 6))).unwrap();
        let (_, value) = max_inference_error_lp(&mdp, &Distribution::uniform(6), &Distribution::uniform(6), &d).unwrap();
        assert!(value.abs() < 1e-12);
    }

    #[test]
    fn inference_error_matches_grid_search() {
        // 4 states, 2 actions everywhere: mechanism is one number per state
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut ts = Vec::new();
        for _ in 0..2 {
            let mut t = Array2::from_shape_fn((4, 4), |_| rng.gen::<f64>());
            for mut row in t.rows_mut() {
                let s = row.sum();
                row /= s;
            }
            ts.push(t);
        }
        let mdp = Mdp::new(ts, vec![vec![0, 1]; 4], array![1.0, 0.0, 0.0, 0.0], Array2::ones((4, 2))).unwrap();
        let mut dm = Array2::zeros((4, 4));
        for i in 0..4 {
            for j in i + 1..4 {
                let v = rng.gen_range(1.0..10.0);
                dm[[i, j]] = v;
                dm[[j, i]] = v;
            }
        }
        let d = DistanceMatrix::new(dm).unwrap();
        let b = Distribution::new(array![0.1, 0.2, 0.3, 0.4]).unwrap();
        let p = Distribution::new(array![0.4, 0.3, 0.2, 0.1]).unwrap();
        let (_, value) = max_inference_error_lp(&mdp, &b, &p, &d).unwrap();
        let mut best = f64::NEG_INFINITY;
        let steps = 20;
        for i0 in 0..=steps {
            for i1 in 0..=steps {
                for i2 in 0..=steps {
                    for i3 in 0..=steps {
                        let q = [i0, i1, i2, i3].map(|i| i as f64 / steps as f64);
                        let f = Mechanism::new(Array2::from_shape_fn((4, 2), |(s, a)| if a == 0 { q[s] } else { 1.0 - q[s] }), &mdp)
                            .unwrap();
                        let (v, _) = expected_inference_error(&posterior(&mdp, &b, &p, &f), &d).unwrap();
                        best = best.max(v);
                    }
                }
            }
        }
        assert!(value >= best - 1e-9);
        assert!(value - best < 0.01, "{value} vs grid {best}");
    }

    #[test]
    fn dp_with_huge_epsilon_is_cheapest_mechanism() {
        let mdp = campus();
        let b = Distribution::uniform(6);
        let p = Distribution::uniform(6);
        let f = dp_mechanism(&mdp, &b, &p, 1e6).unwrap();
        for s in 0..6 {
            let cheapest = mdp.available(s).iter().copied().min_by(|x, y| mdp.utility()[[s, *x]].total_cmp(&mdp.utility()[[s, *y]])).unwrap();
            assert!((f.matrix()[[s, cheapest]] - 1.0).abs() < 1e-12, "state {s}");
        }
    }

    #[test]
    fn dp_uniform_feasible_on_symmetric_fixture() {
        let t1 = array![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
        let t2 = array![[0.5, 0.0, 0.5], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]];
        let mdp = Mdp::new(vec![t1, t2], vec![vec![0, 1]; 3], array![1.0, 0.0, 0.0], Array2::ones((3, 2))).unwrap();
        let f = dp_mechanism(&mdp, &Distribution::uniform(3), &Distribution::uniform(3), 0.01).unwrap();
        let post = posterior(&mdp, &Distribution::uniform(3), &Distribution::uniform(3), &f);
        assert!(max_dp_ratio(&Distribution::uniform(3), &post).unwrap() <= 0.01f64.exp() + 1e-9);
    }

    #[test]
    fn dp_infeasible_from_point_user_start() {
        let mdp = campus();
        let err = dp_mechanism(&mdp, &Distribution::uniform(6), &Distribution::point(6, 0), 0.7).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn entropy_rollout_leaks_the_secret() {
        let mdp = campus();
        let r = rollout(&mdp, BaselineKind::MaxEntropy, &Distribution::uniform(6), &Distribution::uniform(6), 50, None)
            .unwrap();
        let ln6 = 6f64.ln();
        assert!(r.beliefs.iter().all(|b| entropy(b) <= ln6 + 1e-12));
        assert!(r.beliefs.iter().all(|b| entropy(b) >= ln6 - 0.3));
        assert!(r.beliefs[50].as_array()[CAMPUS_SECRET] > 1.0 / 6.0);
    }

    #[test]
    fn dp_rollout_bounds_ratio_and_grows_secret_mass() {
        let mdp = campus();
        let eps = 0.7;
        let r = rollout(
            &mdp,
            BaselineKind::DifferentialPrivacy { epsilon: eps },
            &Distribution::uniform(6),
            &Distribution::uniform(6),
            20,
            None,
        )
        .unwrap();
        for w in r.beliefs.windows(2) {
            assert!(max_dp_ratio(&w[0], &w[1]).unwrap() <= eps.exp() + 1e-6);
        }
        for w in r.beliefs.windows(2) {
            assert!(w[1].as_array()[CAMPUS_SECRET] > w[0].as_array()[CAMPUS_SECRET]);
        }
    }

    #[test]
    fn rollouts_are_deterministic() {
        let mdp = campus();
        let d = DistanceMatrix::from_mdp(&mdp, DistanceKind::Haversine).unwrap();
        let run = || rollout(&mdp, BaselineKind::MaxInferenceError, &Distribution::uniform(6), &Distribution::uniform(6), 10, Some(&d)).unwrap();
        assert_eq!(run(), run());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn optimizers_dominate_random_mechanisms(seed in any::<u64>()) {
            let mdp = campus();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw_b: Array1<f64> = (0..6).map(|_| rng.gen::<f64>() + 0.01).collect();
            let raw_p: Array1<f64> = (0..6).map(|_| rng.gen::<f64>() + 0.01).collect();
            let b = Distribution::new(&raw_b / raw_b.sum()).unwrap();
            let p = Distribution::new(&raw_p / raw_p.sum()).unwrap();
            let d = DistanceMatrix::from_mdp(&mdp, DistanceKind::Haversine).unwrap();

            let (f_err, value) = max_inference_error_lp(&mdp, &b, &p, &d).unwrap();
            let f_ent = max_entropy_mechanism(&mdp, &b, &p).unwrap();
            let h_ent = entropy(&posterior(&mdp, &b, &p, &f_ent));
            let h_uniform = entropy(&posterior(&mdp, &b, &p, &Mechanism::uniform(&mdp)));
            prop_assert!(h_ent >= h_uniform - 1e-6);
            for f in [&f_err, &f_ent] {
                for row in f.matrix().rows() {
                    prop_assert!((row.sum() - 1.0).abs() <= 1e-10);
                }
            }
            for _ in 0..100 {
                let f = random_mechanism(&mdp, &mut rng);
                let post = posterior(&mdp, &b, &p, &f);
                let (v, _) = expected_inference_error(&post, &d).unwrap();
                prop_assert!(value >= v - 1e-7 * v.max(1.0));
            }
        }
    }
}
