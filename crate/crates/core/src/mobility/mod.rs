//! Mobility-model construction from GPS traces: POI clustering, k-area
//! cloaks, empirical transitions and MDP assembly.

pub mod cloak;
pub mod cluster;
pub mod geo;
pub mod traces;
pub mod transitions;

use std::f64::consts::PI;

use ndarray::{Array1, Array2};

pub use cloak::{build_cloaks, CloakRegion};
pub use cluster::{extract_pois, ClusterParams, PoiCluster};
pub use traces::{parse_traces, TraceDataset, TraceFormat, TracePoint};
pub use transitions::{estimate_transitions, TransitionEstimate};

use crate::error::{Error, Result};
use crate::mdp::{ActionMeta, Mdp, StateMeta};

/// Builds the MDP whose states are `pois` and actions `cloaks`. A cloak is
/// available in every state it covers; there the transition row is the
/// empirical one and the utility is `area(cloak) / area(poi)`.
pub fn assemble_mdp(pois: &[PoiCluster], cloaks: &[CloakRegion], p: &Array2<f64>, params: &ClusterParams) -> Result<Mdp> {
    let (n, m) = (pois.len(), cloaks.len());
    if n == 0 || m == 0 {
        return Err(Error::InvalidModel("need at least one POI and one cloak".into()));
    }
    if p.dim() != (n, n) {
        return Err(Error::Dimension(format!("transition estimate is {:?} for {n} POIs", p.dim())));
    }
    if params.start_poi >= n {
        return Err(Error::InvalidArgument(format!("start_poi {} of {n} POIs", params.start_poi)));
    }
    let mut available = vec![Vec::new(); n];
    for (a, c) in cloaks.iter().enumerate() {
        for &s in &c.covered {
            available[s].push(a);
        }
    }
    if let Some(s) = available.iter().position(Vec::is_empty) {
        return Err(Error::InvalidModel(format!("POI {s} is not covered by any cloak")));
    }
    let mut transition = vec![Array2::zeros((n, n)); m];
    let mut utility = Array2::zeros((n, m));
    for (s, acts) in available.iter().enumerate() {
        for &a in acts {
            transition[a].row_mut(s).assign(&p.row(s));
            utility[[s, a]] = PI * cloaks[a].radius.powi(2) / pois[s].area;
        }
    }
    let mut p0 = Array1::zeros(n);
    p0[params.start_poi] = 1.0;
    let states = pois
        .iter()
        .enumerate()
        .map(|(s, c)| StateMeta { label: format!("s{}", s + 1), lat: c.lat, lon: c.lon, area: c.area })
        .collect();
    let actions = cloaks
        .iter()
        .enumerate()
        .map(|(a, c)| ActionMeta { label: format!("a{}", a + 1), lat: c.lat, lon: c.lon, radius: c.radius })
        .collect();
    Mdp::with_completion(transition, available, p0, utility, params.u_bar)?.with_meta(Some(states), Some(actions))
}

/// Every intermediate product of the trace-to-MDP pipeline.
#[derive(Debug, Clone)]
pub struct MobilityModel {
    pub pois: Vec<PoiCluster>,
    pub cloaks: Vec<CloakRegion>,
    pub transitions: TransitionEstimate,
    pub mdp: Mdp,
}

/// Runs clustering, cloaking, transition estimation and assembly.
/// Returns [`Error::InsufficientPois`] when fewer than `k` POIs survive.
pub fn build_model(traces: &TraceDataset, params: &ClusterParams) -> Result<MobilityModel> {
    let pois = extract_pois(traces, params)?;
    if pois.len() < params.k {
        return Err(Error::InsufficientPois { found: pois.len(), k: params.k });
    }
    let cloaks = build_cloaks(&pois, params.k)?;
    let transitions = estimate_transitions(traces, &pois, params.min_speed);
    let mdp = assemble_mdp(&pois, &cloaks, &transitions.probabilities, params)?;
    Ok(MobilityModel { pois, cloaks, transitions, mdp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{check_unichain_exhaustive, UnichainVerdict};
    use proptest::prelude::*;

    fn params() -> ClusterParams {
        ClusterParams {
            min_speed: 1.0,
            max_radius: 50.0,
            min_dist: 200.0,
            min_stay_hours: 1.0,
            k: 2,
            u_bar: None,
            start_poi: 0,
        }
    }

    fn poi(north: f64, east: f64, radius: f64) -> PoiCluster {
        let (lat, lon) = geo::offset(41.7, -86.24, north, east);
        PoiCluster { members: vec![], lat, lon, radius, stay_hours: 1.0, area: PI * radius.max(10.0).powi(2) }
    }

    #[test]
    fn single_poi_with_equal_cloak() {
        let pois = vec![poi(0.0, 0.0, 40.0)];
        let cloak = CloakRegion { lat: pois[0].lat, lon: pois[0].lon, radius: 40.0, covered: vec![0], anchor: 0 };
        let mdp = assemble_mdp(&pois, &[cloak], &ndarray::array![[1.0]], &params()).unwrap();
        assert!((mdp.utility()[[0, 0]] - 1.0).abs() < 1e-12);
        assert_eq!(mdp.transition(0), &ndarray::array![[1.0]]);
    }

    #[test]
    fn doubling_the_radius_quadruples_utility() {
        let pois = vec![poi(0.0, 0.0, 40.0)];
        let u = |r: f64| {
            let c = CloakRegion { lat: pois[0].lat, lon: pois[0].lon, radius: r, covered: vec![0], anchor: 0 };
            assemble_mdp(&pois, &[c], &ndarray::array![[1.0]], &params()).unwrap().utility()[[0, 0]]
        };
        assert!((u(200.0) / u(100.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn uncovered_poi_is_rejected() {
        let pois = vec![poi(0.0, 0.0, 10.0), poi(5000.0, 0.0, 10.0)];
        let c = CloakRegion { lat: pois[0].lat, lon: pois[0].lon, radius: 20.0, covered: vec![0], anchor: 0 };
        let p = Array2::eye(2);
        assert!(assemble_mdp(&pois, &[c], &p, &params()).is_err());
    }

    fn layout() -> impl Strategy<Value = (Vec<(f64, f64, f64)>, usize)> {
        (3usize..7).prop_flat_map(|n| {
            (prop::collection::vec((-3000.0f64..3000.0, -3000.0f64..3000.0, 0.0f64..60.0), n), 2usize..=n)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn assembled_models_are_well_formed((spots, k) in layout(), seed in 0u64..1000) {
            let pois: Vec<_> = spots.iter().map(|&(n, e, r)| poi(n, e, r)).collect();
            let cloaks = build_cloaks(&pois, k).unwrap();
            for c in &cloaks {
                prop_assert!(c.covered.len() >= k);
                for &j in &c.covered {
                    prop_assert!(c.contains(&pois[j]));
                }
            }
            // arbitrary strictly positive transition estimate
            let n = pois.len();
            let p = Array2::from_shape_fn((n, n), |(i, j)| 1.0 + ((seed as usize + 7 * i + 3 * j) % 5) as f64);
            let p = &p / &p.sum_axis(ndarray::Axis(1)).insert_axis(ndarray::Axis(1));
            let mdp = assemble_mdp(&pois, &cloaks, &p, &ClusterParams { k, ..params() }).unwrap();
            let u_bar = mdp.u_bar().unwrap_or(f64::INFINITY);
            for a in 0..mdp.n_actions() {
                for s in 0..n {
                    prop_assert!((mdp.transition(a).row(s).sum() - 1.0).abs() <= 1e-12);
                    prop_assert_eq!(mdp.utility()[[s, a]] < u_bar, mdp.is_available(s, a));
                }
            }
            let verdict = check_unichain_exhaustive(&mdp, 1 << 20);
            let unichain = !matches!(verdict, UnichainVerdict::NotUnichain { .. });
            prop_assert!(unichain);
        }
    }
}
