//! Privacy metrics on adversary beliefs: entropy, expected inference
//! error, the (D,ε) ratio matrix, secret mass, and the ε-privacy check.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::adversary::Belief;
use crate::error::{Error, Result};
use crate::mdp::{Mdp, OPTIMIZATION_TOL};
use crate::mobility::geo;

/// Secret states and the belief threshold ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacySpec {
    n_states: usize,
    secret_states: Vec<usize>,
    epsilon: f64,
}

impl PrivacySpec {
    pub fn new(n_states: usize, secret_states: Vec<usize>, epsilon: f64) -> Result<Self> {
        let mut secret_states = secret_states;
        secret_states.sort_unstable();
        secret_states.dedup();
        if secret_states.is_empty() {
            return Err(Error::InvalidArgument("secret set must be nonempty".into()));
        }
        if let Some(&s) = secret_states.iter().find(|s| **s >= n_states) {
            return Err(Error::InvalidArgument(format!("secret state {s} out of range for {n_states} states")));
        }
        if secret_states.len() == n_states {
            return Err(Error::InvalidArgument("secret set must be a strict subset of the states".into()));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        Ok(Self { n_states, secret_states, epsilon })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.n_states, self.secret_states.clone(), epsilon)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn secret_states(&self) -> &[usize] {
        &self.secret_states
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_secret(&self, s: usize) -> bool {
        self.secret_states.binary_search(&s).is_ok()
    }

    /// Row vector `A_s` with ones on the secret states.
    pub fn selector(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.n_states, |s| if self.is_secret(s) { 1.0 } else { 0.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Haversine,
    Planar,
}

/// Symmetric state-to-state distances in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(Array2<f64>);

impl DistanceMatrix {
    pub fn new(d: Array2<f64>) -> Result<Self> {
        let n = d.nrows();
        if d.ncols() != n {
            return Err(Error::Dimension(format!("distance matrix is {:?}", d.dim())));
        }
        for i in 0..n {
            if d[[i, i]] != 0.0 {
                return Err(Error::InvalidArgument(format!("d({i},{i}) must be 0")));
            }
            for j in 0..n {
                let v = d[[i, j]];
                if !v.is_finite() || v < 0.0 || (v - d[[j, i]]).abs() > 1e-9 * v.abs().max(1.0) {
                    return Err(Error::InvalidArgument(format!("d({i},{j}) must be finite, nonnegative and symmetric")));
                }
            }
        }
        Ok(Self(d))
    }

    /// 0/1 distance.
    pub fn hamming(n: usize) -> Self {
        Self(Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { 1.0 }))
    }

    /// Centroid distances from the MDP's state metadata.
    pub fn from_mdp(mdp: &Mdp, kind: DistanceKind) -> Result<Self> {
        let meta = mdp
            .state_meta()
            .ok_or_else(|| Error::InvalidArgument("MDP has no state coordinates".into()))?;
        let f = match kind {
            DistanceKind::Haversine => geo::haversine,
            DistanceKind::Planar => geo::planar,
        };
        let n = meta.len();
        let mut d = Array2::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                let v = f(meta[i].lat, meta[i].lon, meta[j].lat, meta[j].lon);
                d[[i, j]] = v;
                d[[j, i]] = v;
            }
        }
        Ok(Self(d))
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }
}

/// Natural-log entropy `Σ b(s) ln(1 / b(s))`, with `0 ln 0 = 0`.
pub fn entropy(b: &Belief) -> f64 {
    b.as_array().iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()).sum::<f64>().max(0.0)
}

/// `min_ŝ Σ_s b(s) d(s, ŝ)` and the lowest-index minimizer.
pub fn expected_inference_error(b: &Belief, d: &DistanceMatrix) -> Result<(f64, usize)> {
    let n = b.len();
    if d.n() != n {
        return Err(Error::Dimension(format!("{n}-state belief with {}-state distances", d.n())));
    }
    let costs = d.matrix().t().dot(b.as_array());
    let mut best = (f64::INFINITY, 0);
    for (guess, &c) in costs.iter().enumerate() {
        if c < best.0 {
            best = (c, guess);
        }
    }
    Ok(best)
}

/// `D(s, s') = b_next(s) b_prev(s') / (b_next(s') b_prev(s))`.
///
/// Entries whose denominator is zero are `+inf`; the diagonal is 1.
pub fn dp_ratio(b_prev: &Belief, b_next: &Belief) -> Result<Array2<f64>> {
    let n = b_prev.len();
    if b_next.len() != n {
        return Err(Error::Dimension("beliefs of different length".into()));
    }
    let (p, q) = (b_prev.as_array(), b_next.as_array());
    Ok(Array2::from_shape_fn((n, n), |(s, t)| {
        if s == t {
            return 1.0;
        }
        let den = q[t] * p[s];
        if den == 0.0 {
            f64::INFINITY
        } else {
            q[s] * p[t] / den
        }
    }))
}

/// Largest entry of [`dp_ratio`].
pub fn max_dp_ratio(b_prev: &Belief, b_next: &Belief) -> Result<f64> {
    Ok(dp_ratio(b_prev, b_next)?.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// `A_s · b`.
pub fn secret_mass(b: &Belief, spec: &PrivacySpec) -> f64 {
    spec.secret_states().iter().map(|&s| b.as_array()[s]).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PrivacyVerdict {
    Holds,
    Violated { t: usize, mass: f64 },
}

impl PrivacyVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, Self::Holds)
    }
}

/// Holds iff every belief has secret mass `≤ ε + 1e-9`.
pub fn eps_privacy_check(trajectory: &[Belief], spec: &PrivacySpec) -> Result<PrivacyVerdict> {
    if trajectory.is_empty() {
        return Err(Error::InvalidArgument("empty belief trajectory".into()));
    }
    for (t, b) in trajectory.iter().enumerate() {
        let mass = secret_mass(b, spec);
        if mass > spec.epsilon() + OPTIMIZATION_TOL {
            return Ok(PrivacyVerdict::Violated { t, mass });
        }
    }
    Ok(PrivacyVerdict::Holds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Distribution;
    use ndarray::array;
    use proptest::prelude::*;

    fn belief(v: Vec<f64>) -> Belief {
        Distribution::new(Array1::from(v)).unwrap()
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(entropy(&Distribution::point(6, 2)), 0.0);
        let h = entropy(&Distribution::uniform(6));
        assert!((h - 6f64.ln()).abs() < 1e-15);
        // rounds to the 1.79 quoted for six states
        assert_eq!((h * 100.0).round() / 100.0, 1.79);
        let half = belief(vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0]);
        assert!((entropy(&half) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn inference_error_cases() {
        let d = DistanceMatrix::hamming(3);
        assert_eq!(expected_inference_error(&Distribution::point(3, 1), &d).unwrap(), (0.0, 1));
        let d2 = DistanceMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(expected_inference_error(&Distribution::uniform(2), &d2).unwrap(), (0.5, 0));
    }

    fn brute_force_error(b: &[f64], d: &Array2<f64>) -> (f64, usize) {
        let mut best_val = f64::INFINITY;
        let mut best_idx = usize::MAX;
        for guess in 0..b.len() {
            let mut v = 0.0;
            for s in 0..b.len() {
                v += b[s] * d[[s, guess]];
            }
            if v < best_val {
                best_val = v;
                best_idx = guess;
            }
        }
        (best_val, best_idx)
    }

    #[test]
    fn dp_ratio_cases() {
        let b = Distribution::uniform(3);
        assert!(dp_ratio(&b, &b).unwrap().iter().all(|v| *v == 1.0));
        let r = dp_ratio(&Distribution::uniform(2), &belief(vec![0.6, 0.4])).unwrap();
        assert!((r[[0, 1]] - 1.5).abs() < 1e-15);
        let z = dp_ratio(&Distribution::uniform(2), &belief(vec![1.0, 0.0])).unwrap();
        assert_eq!(z[[0, 1]], f64::INFINITY);
        assert_eq!(z[[1, 0]], 0.0);
    }

    #[test]
    fn secret_mass_and_check() {
        let spec = PrivacySpec::new(6, vec![3], 0.2).unwrap();
        assert!((secret_mass(&Distribution::uniform(6), &spec) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(secret_mass(&Distribution::point(6, 0), &spec), 0.0);
        let unsafe_prior = belief(vec![0.16, 0.16, 0.16, 0.2, 0.16, 0.16]);
        assert!((secret_mass(&unsafe_prior, &spec) - 0.2).abs() < 1e-15);

        assert!(eps_privacy_check(&[Distribution::point(6, 0)], &spec).unwrap().holds());
        assert!(eps_privacy_check(&[unsafe_prior.clone()], &spec).unwrap().holds());
        let tight = spec.with_epsilon(0.19).unwrap();
        assert_eq!(
            eps_privacy_check(&[Distribution::point(6, 0), unsafe_prior], &tight).unwrap(),
            PrivacyVerdict::Violated { t: 1, mass: 0.2 }
        );
        assert!(eps_privacy_check(&[], &spec).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(PrivacySpec::new(3, vec![], 0.5).is_err());
        assert!(PrivacySpec::new(3, vec![0, 1, 2], 0.5).is_err());
        assert!(PrivacySpec::new(3, vec![3], 0.5).is_err());
        assert!(PrivacySpec::new(3, vec![0], 0.0).is_err());
        assert!(PrivacySpec::new(3, vec![0], 1.5).is_err());
        assert_eq!(PrivacySpec::new(3, vec![2, 0, 2], 1.0).unwrap().selector(), array![1.0, 0.0, 1.0]);
    }

    fn simplex_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, n).prop_filter_map("nonzero", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
        })
    }

    fn sym_distances(n: usize) -> impl Strategy<Value = Array2<f64>> {
        proptest::collection::vec(0.0f64..1000.0, n * n).prop_map(move |v| {
            Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { v[i.min(j) * n + i.max(j)] })
        })
    }

    proptest! {
        #[test]
        fn entropy_bounds(v in simplex_vec(6)) {
            let h = entropy(&belief(v));
            prop_assert!((0.0..=6f64.ln() + 1e-12).contains(&h));
        }

        #[test]
        fn inference_error_matches_brute_force_and_scales(v in simplex_vec(5), d in sym_distances(5), c in 0.1f64..10.0) {
            let b = belief(v.clone());
            let dm = DistanceMatrix::new(d.clone()).unwrap();
            let (val, idx) = expected_inference_error(&b, &dm).unwrap();
            let (bval, bidx) = brute_force_error(&v, &d);
            prop_assert!((val - bval).abs() <= 1e-9 * bval.max(1.0));
            prop_assert_eq!(idx, bidx);
            let scaled = DistanceMatrix::new(&d * c).unwrap();
            let (sval, _) = expected_inference_error(&b, &scaled).unwrap();
            prop_assert!((sval - c * val).abs() <= 1e-9 * sval.max(1.0));
        }

        #[test]
        fn dp_ratio_reciprocity(p in simplex_vec(4), q in simplex_vec(4)) {
            let r = dp_ratio(&belief(p), &belief(q)).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    if r[[i, j]].is_finite() && r[[i, j]] > 0.0 && r[[j, i]].is_finite() {
                        prop_assert!((r[[i, j]] * r[[j, i]] - 1.0).abs() < 1e-9);
                    }
                }
            }
        }

        #[test]
        fn secret_mass_linear_and_check_monotone(p in simplex_vec(5), q in simplex_vec(5), w in 0.0f64..1.0, e1 in 0.01f64..1.0, e2 in 0.01f64..1.0) {
            let spec = PrivacySpec::new(5, vec![1, 3], e1.min(e2)).unwrap();
            let mix: Vec<f64> = p.iter().zip(&q).map(|(a, b)| w * a + (1.0 - w) * b).collect();
            let lhs = secret_mass(&belief(mix), &spec);
            let rhs = w * secret_mass(&belief(p.clone()), &spec) + (1.0 - w) * secret_mass(&belief(q.clone()), &spec);
            prop_assert!((lhs - rhs).abs() < 1e-12);
            let traj = vec![belief(p), belief(q)];
            let loose = spec.with_epsilon(e1.max(e2)).unwrap();
            if eps_privacy_check(&traj, &spec).unwrap().holds() {
                prop_assert!(eps_privacy_check(&traj, &loose).unwrap().holds());
            }
        }
    }
}
