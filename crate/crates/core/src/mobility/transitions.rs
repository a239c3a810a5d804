//! Empirical POI-to-POI transition frequencies.

use ndarray::Array2;

use super::cluster::{stationary_mask, PoiCluster};
use super::geo::haversine;
use super::traces::TraceDataset;

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionEstimate {
    /// `counts[[i, j]]`: observed moves from POI i to POI j.
    pub counts: Array2<u64>,
    /// Row-normalized counts; rows without observations are self-loops.
    pub probabilities: Array2<f64>,
}

/// POI containing each stationary sample: the nearest centroid whose disk
/// (radius floored at 10 m) holds the sample.
pub fn assign_samples(traces: &TraceDataset, pois: &[PoiCluster], min_speed: f64) -> Vec<Option<usize>> {
    let stationary = stationary_mask(traces, min_speed);
    traces
        .points()
        .iter()
        .zip(stationary)
        .map(|(p, still)| {
            if !still {
                return None;
            }
            pois.iter()
                .enumerate()
                .map(|(i, c)| (i, haversine(c.lat, c.lon, p.lat, p.lon), c.effective_radius()))
                .filter(|&(_, d, r)| d <= r)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _, _)| i)
        })
        .collect()
}

/// Splits each user's samples into visits: maximal runs of consecutive
/// samples assigned to the same POI. Any moving or unassigned sample ends
/// the current visit.
pub fn visit_sequences(traces: &TraceDataset, assignment: &[Option<usize>]) -> Vec<Vec<usize>> {
    let pts = traces.points();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); traces.users().len()];
    let mut current: Option<usize> = None;
    for (i, poi) in assignment.iter().enumerate() {
        if i > 0 && pts[i - 1].user != pts[i].user {
            current = None;
        }
        match *poi {
            Some(c) if current != Some(c) => {
                out[pts[i].user].push(c);
                current = Some(c);
            }
            Some(_) => {}
            None => current = None,
        }
    }
    out
}

/// Counts transitions between consecutive visits per user and normalizes
/// them into `p_ij = n_ij / N_i`.
pub fn estimate_transitions(traces: &TraceDataset, pois: &[PoiCluster], min_speed: f64) -> TransitionEstimate {
    let assignment = assign_samples(traces, pois, min_speed);
    counts_to_estimate(&visit_sequences(traces, &assignment), pois.len())
}

/// Builds the estimate from explicit visit sequences over `n` POIs.
pub fn counts_to_estimate(sequences: &[Vec<usize>], n: usize) -> TransitionEstimate {
    let mut counts = Array2::<u64>::zeros((n, n));
    for seq in sequences {
        for w in seq.windows(2) {
            counts[[w[0], w[1]]] += 1;
        }
    }
    let mut probabilities = Array2::zeros((n, n));
    for i in 0..n {
        let total: u64 = counts.row(i).sum();
        if total == 0 {
            probabilities[[i, i]] = 1.0;
        } else {
            for j in 0..n {
                probabilities[[i, j]] = counts[[i, j]] as f64 / total as f64;
            }
        }
    }
    TransitionEstimate { counts, probabilities }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::geo::offset;

    #[test]
    fn alternating_visits() {
        let est = counts_to_estimate(&[vec![0, 1, 0, 1]], 2);
        assert_eq!(est.counts, ndarray::array![[0, 2], [1, 0]]);
        assert_eq!(est.probabilities, ndarray::array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn unobserved_rows_self_loop() {
        let est = counts_to_estimate(&[vec![0]], 1);
        assert_eq!(est.probabilities, ndarray::array![[1.0]]);
        let est = counts_to_estimate(&[vec![0, 1]], 3);
        assert_eq!(est.probabilities.row(1).to_vec(), vec![0.0, 1.0, 0.0]);
        assert_eq!(est.probabilities.row(2).to_vec(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn visits_break_on_movement_and_user_change() {
        let here = offset(41.7, -86.24, 0.0, 0.0);
        let away = offset(41.7, -86.24, 3000.0, 0.0);
        let poi = PoiCluster { members: vec![], lat: here.0, lon: here.1, radius: 5.0, stay_hours: 1.0, area: 0.0 };
        let rows = vec![
            ("u", here.0, here.1, 0.0),
            ("u", here.0, here.1, 300.0),
            ("u", away.0, away.1, 400.0),
            ("u", here.0, here.1, 500.0),
            ("u", here.0, here.1, 800.0),
            ("v", here.0, here.1, 0.0),
            ("v", here.0, here.1, 300.0),
        ];
        let ds = TraceDataset::from_rows(rows);
        let assignment = assign_samples(&ds, &[poi], 1.0);
        // the sample arriving after the trip is moving
        assert_eq!(assignment, vec![Some(0), Some(0), None, None, Some(0), Some(0), Some(0)]);
        assert_eq!(visit_sequences(&ds, &assignment), vec![vec![0, 0], vec![0]]);
    }
}
