//! k-area cloaking regions over extracted POIs.

use serde::{Deserialize, Serialize};

use super::cluster::PoiCluster;
use super::geo::haversine;
use crate::error::{Error, Result};

/// Slack (m) when testing whether a POI disk lies inside a cloak.
const COVER_TOL_M: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloakRegion {
    pub lat: f64,
    pub lon: f64,
    /// Meters.
    pub radius: f64,
    /// Every POI whose disk lies inside the circle, ascending.
    pub covered: Vec<usize>,
    /// POI the region was built around.
    pub anchor: usize,
}

impl CloakRegion {
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }

    /// Whether the whole disk of `poi` lies inside the region.
    pub fn contains(&self, poi: &PoiCluster) -> bool {
        haversine(self.lat, self.lon, poi.lat, poi.lon) + poi.effective_radius() <= self.radius + COVER_TOL_M
    }
}

/// One circle per POI covering it and its `k - 1` nearest neighbours
/// (centroid distance, ties by index). The center is the mean of the
/// covered centroids and the radius the smallest that contains each
/// covered POI's disk. Regions with identical neighbour sets are emitted
/// once.
pub fn build_cloaks(pois: &[PoiCluster], k: usize) -> Result<Vec<CloakRegion>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if pois.len() < k {
        return Err(Error::InvalidArgument(format!("{} POIs cannot satisfy k = {k}", pois.len())));
    }
    let dist = |i: usize, j: usize| haversine(pois[i].lat, pois[i].lon, pois[j].lat, pois[j].lon);
    let mut seen: Vec<Vec<usize>> = Vec::new();
    let mut cloaks = Vec::new();
    for anchor in 0..pois.len() {
        let mut others: Vec<usize> = (0..pois.len()).filter(|&j| j != anchor).collect();
        others.sort_by(|&a, &b| dist(anchor, a).total_cmp(&dist(anchor, b)).then(a.cmp(&b)));
        let mut set: Vec<usize> = std::iter::once(anchor).chain(others.into_iter().take(k - 1)).collect();
        set.sort_unstable();
        if seen.contains(&set) {
            continue;
        }
        let lat = set.iter().map(|&j| pois[j].lat).sum::<f64>() / k as f64;
        let lon = set.iter().map(|&j| pois[j].lon).sum::<f64>() / k as f64;
        let radius = set
            .iter()
            .map(|&j| haversine(lat, lon, pois[j].lat, pois[j].lon) + pois[j].effective_radius())
            .fold(0.0, f64::max);
        let mut region = CloakRegion { lat, lon, radius, covered: Vec::new(), anchor };
        region.covered = (0..pois.len()).filter(|&j| region.contains(&pois[j])).collect();
        debug_assert!(set.iter().all(|j| region.covered.contains(j)));
        seen.push(set);
        cloaks.push(region);
    }
    Ok(cloaks)
}
