use ndarray::{array, Array1, Array2};

use super::*;
use crate::adversary::{adversary_matrix, belief_trajectory, stationary_belief};
use crate::error::Error;
use crate::fixtures::{campus, CAMPUS_SECRET};
use crate::linalg::l1_distance;
use crate::mdp::{
    average_cost, induce_chain, policy_from_theta, stationary_distribution, theta_from_policy, Mdp, Policy,
};
use crate::metrics::{eps_privacy_check, secret_mass, PrivacySpec};

fn spec(eps: f64) -> PrivacySpec {
    PrivacySpec::new(6, vec![CAMPUS_SECRET], eps).unwrap()
}

fn uniform_excluding_secret() -> Distribution {
    let mut b = Array1::from_elem(6, 0.2);
    b[CAMPUS_SECRET] = 0.0;
    Distribution::new(b).unwrap()
}

#[test]
fn single_action_mdp_gives_stationary_distribution() {
    let t = array![[0.9, 0.1, 0.0], [0.0, 0.5, 0.5], [0.3, 0.0, 0.7]];
    let mdp = Mdp::new(vec![t.clone()], vec![vec![0]; 3], array![1.0, 0.0, 0.0], array![[1.0], [2.0], [3.0]]).unwrap();
    let res = synthesize_unconstrained(&mdp, &SynthesisOptions::default()).unwrap();
    let chain = crate::mdp::MarkovChain::from_matrix(t).unwrap();
    let p = stationary_distribution(&chain).unwrap();
    assert!(l1_distance(&res.theta.matrix().column(0).to_owned(), p.as_array()) < 1e-12);
}

#[test]
fn constant_utility_value() {
    let base = campus();
    let mut u = base.utility().clone();
    for s in 0..6 {
        for &a in base.available(s) {
            u[[s, a]] = 7.0;
        }
    }
    let mdp = Mdp::with_completion(base.transitions().to_vec(), base.availability().to_vec(), base.p0().clone(), u, None)
        .unwrap();
    let res = synthesize_unconstrained(&mdp, &SynthesisOptions::default()).unwrap();
    assert!((res.v - 7.0).abs() < 1e-9);
}

#[test]
fn unconstrained_beats_uniform_policy() {
    let mdp = campus();
    let res = synthesize_unconstrained(&mdp, &SynthesisOptions::default()).unwrap();
    let policy = Policy::uniform(&mdp);
    let p = stationary_distribution(&induce_chain(&mdp, &policy).unwrap()).unwrap();
    let v_uniform = average_cost(&theta_from_policy(&policy, &p, &mdp).unwrap(), &mdp);
    assert!(res.v < v_uniform - 1e-6, "{} vs {v_uniform}", res.v);
    assert!(res.diagnostics.balance_residual < 1e-9);
    assert!((average_cost(&res.theta, &mdp) - res.v).abs() < 1e-12);
    assert!(l1_distance(&res.theta.state_marginal(), res.p_inf.as_array()) < 1e-12);
}

#[test]
fn multichain_mdp_is_rejected() {
    let split = Mdp::new(
        vec![array![[0.5, 0.5], [0.5, 0.5]], array![[1.0, 0.0], [0.0, 1.0]]],
        vec![vec![0, 1], vec![0, 1]],
        array![1.0, 0.0],
        array![[1.0, 1.0], [1.0, 1.0]],
    )
    .unwrap();
    assert!(matches!(synthesize_unconstrained(&split, &SynthesisOptions::default()), Err(Error::NotUnichain { .. })));
}

#[test]
fn vacuous_epsilon_matches_unconstrained() {
    let mdp = campus();
    let opts = SynthesisOptions::default();
    let free = synthesize_unconstrained(&mdp, &opts).unwrap();
    let private = synthesize_eps_private(&mdp, &spec(1.0), &opts).unwrap();
    assert!((free.v - private.v).abs() < 1e-8);
}

#[test]
fn eps_private_policy_is_invariant_and_costs_more() {
    let mdp = campus();
    let opts = SynthesisOptions::default();
    let free = synthesize_unconstrained(&mdp, &opts).unwrap();
    let sp = spec(0.2);
    let res = synthesize_eps_private(&mdp, &sp, &opts).unwrap();
    assert!(res.v >= free.v - 1e-9);
    let chain = adversary_matrix(&mdp, &res.theta);
    assert!(verify_invariance(&chain, &sp).unwrap().is_invariant());
    assert!(res.certificate.as_ref().unwrap().max_violation(&chain, &sp) <= 1e-9);
    let traj = belief_trajectory(&chain, &uniform_excluding_secret(), 1000).unwrap();
    assert!(eps_privacy_check(&traj, &sp).unwrap().holds());

    // the extracted policy reproduces θ
    let (mu, p) = policy_from_theta(&res.theta, &mdp).unwrap();
    let back = theta_from_policy(&mu, &p, &mdp).unwrap();
    assert!((back.matrix() - res.theta.matrix()).iter().all(|d| d.abs() <= 1e-10));
}

#[test]
fn unconstrained_policy_leaks_on_tight_epsilon() {
    let mdp = campus();
    let free = synthesize_unconstrained(&mdp, &SynthesisOptions::default()).unwrap();
    let sp = spec(0.16);
    let chain = adversary_matrix(&mdp, &free.theta);
    let traj = belief_trajectory(&chain, &uniform_excluding_secret(), 1000).unwrap();
    assert!(!eps_privacy_check(&traj, &sp).unwrap().holds());
    assert!(!verify_invariance(&chain, &sp).unwrap().is_invariant());
}

#[test]
fn infeasible_epsilon_is_diagnosed() {
    let mdp = campus();
    let err = synthesize_eps_private(&mdp, &spec(0.05), &SynthesisOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Infeasible(_)), "{err}");
    let diag = diagnose_eps_infeasibility(&mdp, &spec(0.05), &SynthesisOptions::default()).unwrap();
    assert!(diag.sigma > 1e-6);
    assert!(diag.tightest_state < 6);
}

#[test]
fn cost_is_monotone_in_epsilon() {
    let mdp = campus();
    let opts = SynthesisOptions::default();
    let mut prev = f64::INFINITY;
    for k in 1..=20 {
        let eps = 0.05 * k as f64;
        if let Ok(res) = synthesize_eps_private(&mdp, &spec(eps), &opts) {
            assert!(res.v <= prev + 1e-9, "eps {eps}: {} > {prev}", res.v);
            prev = res.v;
        }
    }
    assert!(prev.is_finite());
}

#[test]
fn theta_floor_keeps_every_pair_positive() {
    let mdp = campus();
    let opts = SynthesisOptions { theta_floor: 1e-3, ..Default::default() };
    let res = synthesize_unconstrained(&mdp, &opts).unwrap();
    for s in 0..6 {
        for &a in mdp.available(s) {
            assert!(res.theta.matrix()[[s, a]] >= 1e-3 - 1e-12);
        }
    }
}

#[test]
fn asymptotic_suppresses_an_unsafe_prior() {
    let mdp = campus();
    let sp = spec(0.16);
    let opts = AsymptoticOptions::default();
    let res = synthesize_asymptotic(&mdp, &sp, &opts).unwrap();
    let b_inf = res.b_inf.clone().unwrap();
    assert!(secret_mass(&b_inf, &sp) <= 0.16 + 1e-6);
    assert!(res.diagnostics.fixed_point_residual.unwrap() <= 1e-7);
    let chain = adversary_matrix(&mdp, &res.theta);
    let exact = stationary_belief(&chain).unwrap();
    assert!(l1_distance(exact.as_array(), b_inf.as_array()) <= 1e-7);

    let mut b0 = Array1::from_elem(6, 0.16);
    b0[CAMPUS_SECRET] = 0.2;
    let traj = belief_trajectory(&chain, &Distribution::new(b0).unwrap(), 2000).unwrap();
    let masses: Vec<f64> = traj.iter().map(|b| secret_mass(b, &sp)).collect();
    let last_above = masses.iter().rposition(|m| *m > 0.16).unwrap();
    assert!(last_above < 500, "{last_above}");

    let free = synthesize_unconstrained(&mdp, &SynthesisOptions::default()).unwrap();
    assert!(res.v >= free.v - 1e-9);
}

#[test]
fn asymptotic_is_deterministic_and_parallel_invariant() {
    let mdp = campus();
    let sp = spec(0.2);
    let opts = AsymptoticOptions { starts: 4, ..Default::default() };
    let a = synthesize_asymptotic(&mdp, &sp, &opts).unwrap();
    let b = synthesize_asymptotic(&mdp, &sp, &AsymptoticOptions { parallel: false, ..opts.clone() }).unwrap();
    assert_eq!(a, b);
}

#[test]
fn asymptotic_with_slack_epsilon_reaches_unconstrained_cost() {
    let mdp = campus();
    let free = synthesize_unconstrained(&mdp, &SynthesisOptions::default()).unwrap();
    let res = synthesize_asymptotic(&mdp, &spec(0.9), &AsymptoticOptions { starts: 4, ..Default::default() }).unwrap();
    assert!((res.v - free.v).abs() < 1e-6 * free.v, "{} vs {}", res.v, free.v);
}

#[test]
fn dimension_mismatch_is_reported() {
    let mdp = campus();
    let sp = PrivacySpec::new(3, vec![0], 0.5).unwrap();
    assert!(matches!(synthesize_eps_private(&mdp, &sp, &SynthesisOptions::default()), Err(Error::Dimension(_))));
    let _ = Array2::<f64>::zeros((1, 1));
}
