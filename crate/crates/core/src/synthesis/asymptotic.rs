//! Asymptotic ε-privacy: minimize `Σ θ u` subject to the stationary
//! adversary belief `b∞ = M_adv(θ)ᵀ b∞` satisfying `A_s b∞ ≤ ε`.
//!
//! The constraint is bilinear in `(θ, b∞)`. Each round linearizes it at the
//! current point `(θ_k, b_k)`, where `b_k` is the exact stationary belief of
//! `M_adv(θ_k)`:
//!
//! ```text
//! M_kᵀ b + Σ_a θ_a T[a]ᵀ b_k − b − r⁺ + r⁻ = b_k
//! ```
//!
//! and solves an LP in `(θ, b, r⁺, r⁻)` with the residual penalized by `ρ`,
//! `A_s b ≤ ε − margin`, and a box trust region of radius `Δ`. The LP's
//! `θ` is then accepted if it lowers the merit
//! `v(θ) + ρ·max(0, A_s b∞(θ) − ε + margin)`, with `b∞(θ)` recomputed
//! exactly; otherwise `Δ` is halved.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{adversary_matrix, stationary_belief, Belief};
use crate::error::{Error, Result};
use crate::mdp::{
    average_cost, induce_chain, stationary_distribution, theta_from_policy, Mdp, OccupancyMeasure, Policy,
};
use crate::metrics::{secret_mass, PrivacySpec};
use crate::optim::solve_lp;

use super::occupancy::{check_spec, finish, occupancy_lp, require_unichain, theta_index, theta_matrix};
use super::{SynthesisMode, SynthesisOptions, SynthesisResult};

/// Accepted results must satisfy `A_s b∞ ≤ ε + FEASIBILITY_SLACK`.
const FEASIBILITY_SLACK: f64 = 1e-6;
/// Accepted results must satisfy `‖M_advᵀ b∞ − b∞‖₁ ≤ RESIDUAL_TOL`.
const RESIDUAL_TOL: f64 = 1e-7;
/// Rounds stop once the trust region is this small.
const MIN_RADIUS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AsymptoticOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_rounds: usize,
    /// The LP targets `A_s b ≤ ε − margin` so the returned belief sits
    /// strictly inside the safe set.
    pub margin: f64,
    pub initial_radius: f64,
    /// Penalty `ρ`; defaults to `1000 × max available utility`.
    pub penalty: Option<f64>,
    /// Run starts on the rayon pool. Results do not depend on this flag.
    pub parallel: bool,
    #[serde(flatten)]
    pub base: SynthesisOptions,
}

impl Default for AsymptoticOptions {
    fn default() -> Self {
        Self {
            starts: 16,
            seed: 0,
            max_rounds: 200,
            margin: 1e-4,
            initial_radius: 0.25,
            penalty: None,
            parallel: true,
            base: SynthesisOptions::default(),
        }
    }
}

struct Point {
    theta: OccupancyMeasure,
    b_inf: Belief,
    v: f64,
    mass: f64,
}

impl Point {
    fn new(mdp: &Mdp, spec: &PrivacySpec, theta: OccupancyMeasure) -> Option<Self> {
        let b_inf = stationary_belief(&adversary_matrix(mdp, &theta)).ok()?;
        let v = average_cost(&theta, mdp);
        let mass = secret_mass(&b_inf, spec);
        Some(Self { theta, b_inf, v, mass })
    }

    fn merit(&self, target: f64, rho: f64) -> f64 {
        self.v + rho * (self.mass - target).max(0.0)
    }
}

struct StartOutcome {
    point: Point,
    rounds: usize,
    lp_iterations: usize,
    max_violation: f64,
}

fn random_start(mdp: &Mdp, seed: u64, index: usize) -> Option<OccupancyMeasure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut mu = Array2::zeros((mdp.n_states(), mdp.n_actions()));
    for s in 0..mdp.n_states() {
        // Dirichlet(1, ..., 1) over A(s)
        let w: Vec<f64> = mdp.available(s).iter().map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = w.iter().sum();
        for (&a, wi) in mdp.available(s).iter().zip(&w) {
            mu[[s, a]] = wi / total;
        }
        let sum = mu.row(s).sum();
        mu.row_mut(s).mapv_inplace(|v| v / sum);
    }
    let policy = Policy::new(mu, mdp).ok()?;
    let p = stationary_distribution(&induce_chain(mdp, &policy).ok()?).ok()?;
    theta_from_policy(&policy, &p, mdp).ok()
}

fn run_start(
    mdp: &Mdp,
    spec: &PrivacySpec,
    opts: &AsymptoticOptions,
    rho: f64,
    index: usize,
) -> Result<Option<StartOutcome>> {
    let Some(theta0) = random_start(mdp, opts.seed, index) else {
        log::debug!("start {index}: random policy does not induce an ergodic chain");
        return Ok(None);
    };
    let Some(mut current) = Point::new(mdp, spec, theta0) else {
        return Ok(None);
    };
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let nm = n * m;
    let target = spec.epsilon() - opts.margin;
    let selector = spec.selector();
    let mut radius = opts.initial_radius;
    let mut lp_iterations = 0;
    let mut max_violation: f64 = 0.0;
    let mut rounds = 0;

    while rounds < opts.max_rounds && radius >= MIN_RADIUS {
        rounds += 1;
        let mut lp = occupancy_lp(mdp, 3 * n, opts.base.theta_floor);
        let (b_off, rp_off, rm_off) = (nm, nm + n, nm + 2 * n);
        for i in 0..n {
            lp.c[rp_off + i] = rho;
            lp.c[rm_off + i] = rho;
        }
        let bk = current.b_inf.as_array();
        let mk = adversary_matrix(mdp, &current.theta);
        let pulled: Vec<Array1<f64>> = (0..m).map(|a| mdp.transition(a).t().dot(bk)).collect();
        let d = lp.num_vars();
        for i in 0..n {
            let mut row = vec![0.0; d];
            for j in 0..n {
                row[b_off + j] = mk.matrix()[[j, i]];
            }
            row[b_off + i] -= 1.0;
            for (a, pa) in pulled.iter().enumerate() {
                for s in 0..n {
                    if mdp.is_available(s, a) {
                        row[theta_index(mdp, s, a)] = pa[i];
                    }
                }
            }
            row[rp_off + i] = -1.0;
            row[rm_off + i] = 1.0;
            lp.add_eq(row, bk[i]);
        }
        let mut sum_b = vec![0.0; d];
        sum_b[b_off..b_off + n].fill(1.0);
        lp.add_eq(sum_b, 1.0);
        let mut safe = vec![0.0; d];
        for i in 0..n {
            safe[b_off + i] = selector[i];
        }
        lp.add_ub(safe, target);

        let theta_k = current.theta.matrix();
        for s in 0..n {
            for a in 0..m {
                if mdp.is_available(s, a) {
                    let j = theta_index(mdp, s, a);
                    let lo = (theta_k[[s, a]] - radius).max(opts.base.theta_floor);
                    lp.set_bounds(j, lo, theta_k[[s, a]] + radius);
                }
            }
        }
        for i in 0..n {
            lp.set_bounds(b_off + i, (bk[i] - radius).max(0.0), (bk[i] + radius).min(1.0));
        }

        let sol = solve_lp(&lp)?;
        lp_iterations += sol.iterations;
        if !sol.is_optimal() {
            // The trust region can exclude every occupancy measure once the
            // floor or bounds bite; shrinking does not help, so stop.
            log::debug!("start {index} round {rounds}: linearized LP {:?}", sol.status);
            break;
        }
        max_violation = max_violation.max(sol.max_violation);
        let candidate = OccupancyMeasure::from_lp(theta_matrix(mdp, &sol.x), mdp)
            .ok()
            .and_then(|t| Point::new(mdp, spec, t));
        let step: f64 = match &candidate {
            Some(c) => (c.theta.matrix() - theta_k).iter().map(|v| v.abs()).sum(),
            None => f64::INFINITY,
        };
        match candidate {
            Some(c) if c.merit(target, rho) < current.merit(target, rho) - 1e-13 * current.merit(target, rho).abs().max(1.0) => {
                current = c;
                if step >= 0.5 * radius {
                    radius = (2.0 * radius).min(1.0);
                }
            }
            _ => {
                if step <= RESIDUAL_TOL {
                    break;
                }
                radius *= 0.5;
            }
        }
    }
    Ok(Some(StartOutcome { point: current, rounds, lp_iterations, max_violation }))
}

fn fixed_point_residual(mdp: &Mdp, theta: &OccupancyMeasure, b: &Belief) -> f64 {
    let chain = adversary_matrix(mdp, theta);
    let next = chain.step(b.as_array());
    next.iter().zip(b.as_array().iter()).map(|(x, y)| (x - y).abs()).sum()
}

/// Multi-start sequential linearization. Returns the lowest-cost start
/// whose stationary adversary belief satisfies `A_s b∞ ≤ ε + 1e-6` with
/// fixed-point residual at most `1e-7`; ties go to the lower start index.
///
/// Only local optimality is claimed. When no start reaches a feasible
/// point the result is [`Error::NoFeasiblePoint`], which does not prove
/// that none exists.
pub fn synthesize_asymptotic(mdp: &Mdp, spec: &PrivacySpec, opts: &AsymptoticOptions) -> Result<SynthesisResult> {
    check_spec(mdp, spec)?;
    require_unichain(mdp, &opts.base)?;
    if opts.starts == 0 {
        return Err(Error::InvalidArgument("at least one start is required".into()));
    }
    if !(opts.margin >= 0.0 && opts.margin < spec.epsilon()) {
        return Err(Error::InvalidArgument(format!("margin {} must lie in [0, ε)", opts.margin)));
    }
    let rho = opts.penalty.unwrap_or_else(|| 1e3 * mdp.max_available_utility().abs().max(1.0));
    let outcomes: Vec<Result<Option<StartOutcome>>> = if opts.parallel {
        (0..opts.starts).into_par_iter().map(|k| run_start(mdp, spec, opts, rho, k)).collect()
    } else {
        (0..opts.starts).map(|k| run_start(mdp, spec, opts, rho, k)).collect()
    };

    let mut best: Option<(usize, StartOutcome, f64)> = None;
    let mut feasible = 0;
    let mut lowest_mass = f64::INFINITY;
    let mut total_iterations = 0;
    for (k, outcome) in outcomes.into_iter().enumerate() {
        let Some(outcome) = outcome? else { continue };
        total_iterations += outcome.lp_iterations;
        let p = &outcome.point;
        lowest_mass = lowest_mass.min(p.mass);
        let residual = fixed_point_residual(mdp, &p.theta, &p.b_inf);
        log::debug!("start {k}: v = {:.6}, secret mass = {:.6}, rounds = {}", p.v, p.mass, outcome.rounds);
        if p.mass > spec.epsilon() + FEASIBILITY_SLACK || residual > RESIDUAL_TOL {
            continue;
        }
        feasible += 1;
        if best.as_ref().map_or(true, |(_, b, _)| p.v < b.point.v) {
            best = Some((k, outcome, residual));
        }
    }
    let Some((k, outcome, residual)) = best else {
        return Err(Error::NoFeasiblePoint(format!(
            "none of {} starts reached a stationary secret mass below {} (lowest {:.6}); \
             this does not prove infeasibility",
            opts.starts,
            spec.epsilon(),
            lowest_mass
        )));
    };
    let StartOutcome { point, rounds, max_violation, .. } = outcome;
    let mut result = finish(mdp, point.theta, SynthesisMode::Asymptotic, total_iterations, max_violation, None)?;
    result.b_inf = Some(point.b_inf);
    result.diagnostics.fixed_point_residual = Some(residual);
    result.diagnostics.rounds = Some(rounds);
    result.diagnostics.best_start = Some(k);
    result.diagnostics.feasible_starts = Some(feasible);
    Ok(result)
}
