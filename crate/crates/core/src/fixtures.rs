//! Hand-built six-POI campus model used by tests, benches and the CLI's
//! `--fixture campus` flag.
//!
//! States `s1..s6` form a chain of neighborhoods; from each state every
//! available cloak leads uniformly to the listed successors (self
//! included). Six circular cloaks `a..f` are available as follows:
//!
//! | state | successors      | cloaks    | area (m²) |
//! |-------|-----------------|-----------|-----------|
//! | s1    | s1 s2 s3        | a e       | 6000      |
//! | s2    | s2 s1 s3 s5     | b d e     | 3000      |
//! | s3    | s3 s2 s4        | a d e     | 2500      |
//! | s4    | s4 s3 s5        | b d f     | 1500      |
//! | s5    | s5 s4 s6        | b c       | 2000      |
//! | s6    | s6 s5 s4        | c f       | 1800      |
//!
//! Cloak radii in meters: a 150, b 220, c 120, d 180, e 130, f 160.
//! Utility is `π r_a² / area(s)`; the user starts in `s1`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};

use crate::mdp::{ActionMeta, Mdp, StateMeta};

pub const CAMPUS_SUCCESSORS: [&[usize]; 6] = [&[0, 1, 2], &[1, 0, 2, 4], &[2, 1, 3], &[3, 2, 4], &[4, 3, 5], &[5, 4, 3]];
pub const CAMPUS_AVAILABLE: [&[usize]; 6] = [&[0, 4], &[1, 3, 4], &[0, 3, 4], &[1, 3, 5], &[1, 2], &[2, 5]];
pub const CAMPUS_AREAS: [f64; 6] = [6000.0, 3000.0, 2500.0, 1500.0, 2000.0, 1800.0];
pub const CAMPUS_RADII: [f64; 6] = [150.0, 220.0, 120.0, 180.0, 130.0, 160.0];

/// Index of `s4`, the state treated as secret in the campus experiments.
pub const CAMPUS_SECRET: usize = 3;

const STATE_COORDS: [(f64, f64); 6] = [
    (41.7030, -86.2390),
    (41.7018, -86.2372),
    (41.7005, -86.2360),
    (41.6992, -86.2349),
    (41.6980, -86.2337),
    (41.6969, -86.2351),
];

const ACTION_COORDS: [(f64, f64); 6] = [
    (41.7018, -86.2377),
    (41.6990, -86.2350),
    (41.6975, -86.2345),
    (41.7000, -86.2358),
    (41.7020, -86.2375),
    (41.6982, -86.2350),
];

/// The campus MDP with metadata attached.
pub fn campus() -> Mdp {
    let n = 6;
    let m = 6;
    let mut transition = vec![Array2::zeros((n, n)); m];
    let mut utility = Array2::zeros((n, m));
    for s in 0..n {
        let succ = CAMPUS_SUCCESSORS[s];
        for &a in CAMPUS_AVAILABLE[s] {
            for &t in succ {
                transition[a][[s, t]] = 1.0 / succ.len() as f64;
            }
            utility[[s, a]] = PI * CAMPUS_RADII[a].powi(2) / CAMPUS_AREAS[s];
        }
    }
    let available = CAMPUS_AVAILABLE.iter().map(|a| a.to_vec()).collect();
    let mut p0 = Array1::zeros(n);
    p0[0] = 1.0;
    let states = (0..n)
        .map(|s| StateMeta {
            label: format!("s{}", s + 1),
            lat: STATE_COORDS[s].0,
            lon: STATE_COORDS[s].1,
            area: CAMPUS_AREAS[s],
        })
        .collect();
    let actions = (0..m)
        .map(|a| ActionMeta {
            label: ((b'a' + a as u8) as char).to_string(),
            lat: ACTION_COORDS[a].0,
            lon: ACTION_COORDS[a].1,
            radius: CAMPUS_RADII[a],
        })
        .collect();
    Mdp::with_completion(transition, available, p0, utility, None)
        .and_then(|mdp| mdp.with_meta(Some(states), Some(actions)))
        .expect("campus fixture is well formed")
}
