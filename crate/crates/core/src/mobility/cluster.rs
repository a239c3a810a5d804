//! DJ-Cluster point-of-interest extraction.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::geo::haversine;
use super::traces::TraceDataset;
use crate::error::{Error, Result};

/// Smallest radius used when turning a cluster into an area, so that a
/// single-point cluster still has positive area.
pub const MIN_POI_RADIUS_M: f64 = 10.0;

/// Inputs of the MDP construction pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterParams {
    /// Samples moving faster than this (m/s) are discarded. Zero keeps only
    /// exact repeats.
    pub min_speed: f64,
    /// Maximum distance (m) of a member from its cluster centroid.
    pub max_radius: f64,
    /// Clusters whose centroids are closer than this (m) are merged.
    pub min_dist: f64,
    /// Clusters with less total dwell time (hours) are dropped.
    pub min_stay_hours: f64,
    /// Each cloak covers at least `k` POIs.
    pub k: usize,
    /// Utility of unavailable cloaks; defaults to the MDP completion rule.
    #[serde(default)]
    pub u_bar: Option<f64>,
    /// POI index carrying the initial distribution.
    #[serde(default)]
    pub start_poi: usize,
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        if !(self.min_speed.is_finite() && self.min_speed >= 0.0) {
            return Err(Error::InvalidArgument(format!("min_speed must be >= 0, got {}", self.min_speed)));
        }
        for (name, v) in [("max_radius", self.max_radius), ("min_dist", self.min_dist), ("min_stay_hours", self.min_stay_hours)] {
            if !finite_pos(v) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.k < 2 {
            return Err(Error::InvalidArgument(format!("k must be at least 2, got {}", self.k)));
        }
        if let Some(u) = self.u_bar {
            if !finite_pos(u) {
                return Err(Error::InvalidArgument(format!("u_bar must be positive, got {u}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiCluster {
    /// Indices into [`TraceDataset::points`], ascending.
    pub members: Vec<usize>,
    pub lat: f64,
    pub lon: f64,
    /// Largest member distance from the centroid (m).
    pub radius: f64,
    pub stay_hours: f64,
    /// `π max(radius, 10 m)²`.
    pub area: f64,
}

impl PoiCluster {
    /// Radius with the [`MIN_POI_RADIUS_M`] floor applied.
    pub fn effective_radius(&self) -> f64 {
        self.radius.max(MIN_POI_RADIUS_M)
    }
}

/// Per-sample speed in m/s: from the previous sample of the same user, or
/// to the next one for a user's first sample. Lone samples get speed 0.
pub fn sample_speeds(traces: &TraceDataset) -> Vec<f64> {
    let pts = traces.points();
    let speed = |i: usize, j: usize| {
        let (a, b) = (&pts[i], &pts[j]);
        haversine(a.lat, a.lon, b.lat, b.lon) / (b.t - a.t)
    };
    (0..pts.len())
        .map(|i| {
            if i > 0 && pts[i - 1].user == pts[i].user {
                speed(i - 1, i)
            } else if i + 1 < pts.len() && pts[i + 1].user == pts[i].user {
                speed(i, i + 1)
            } else {
                0.0
            }
        })
        .collect()
}

/// Flags samples whose speed does not exceed `min_speed`.
pub fn stationary_mask(traces: &TraceDataset, min_speed: f64) -> Vec<bool> {
    sample_speeds(traces).into_iter().map(|v| v <= min_speed).collect()
}

struct Group {
    members: Vec<usize>,
    lat: f64,
    lon: f64,
}

impl Group {
    fn recenter(&mut self, traces: &TraceDataset) {
        let pts = traces.points();
        let n = self.members.len() as f64;
        self.lat = self.members.iter().map(|&i| pts[i].lat).sum::<f64>() / n;
        self.lon = self.members.iter().map(|&i| pts[i].lon).sum::<f64>() / n;
    }

    /// Drops members farther than `max_radius` from the centroid until every
    /// remaining member is within range. Returns false once empty.
    fn trim(&mut self, traces: &TraceDataset, max_radius: f64) -> bool {
        let pts = traces.points();
        loop {
            if self.members.is_empty() {
                return false;
            }
            self.recenter(traces);
            let before = self.members.len();
            let (lat, lon) = (self.lat, self.lon);
            self.members.retain(|&i| haversine(lat, lon, pts[i].lat, pts[i].lon) <= max_radius);
            if self.members.len() == before {
                return true;
            }
        }
    }
}

/// Three-phase DJ-Cluster:
/// 1. discard samples faster than `min_speed` and group the rest, each
///    joining the nearest running centroid within `max_radius`;
/// 2. repeatedly merge the closest pair of clusters nearer than `min_dist`;
/// 3. drop clusters with total dwell below `min_stay_hours`.
///
/// Dwell time sums the gaps from each clustered sample to the next sample
/// of the same user when that sample is stationary too. Output order
/// follows each cluster's first member.
pub fn extract_pois(traces: &TraceDataset, params: &ClusterParams) -> Result<Vec<PoiCluster>> {
    params.validate()?;
    let pts = traces.points();
    let stationary = stationary_mask(traces, params.min_speed);

    let mut groups: Vec<Group> = Vec::new();
    let mut sums: Vec<(f64, f64)> = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        if !stationary[i] {
            continue;
        }
        let nearest = groups
            .iter()
            .enumerate()
            .map(|(g, grp)| (g, haversine(grp.lat, grp.lon, p.lat, p.lon)))
            .filter(|&(_, d)| d <= params.max_radius)
            .fold(None, |best: Option<(usize, f64)>, (g, d)| match best {
                Some((_, bd)) if bd <= d => best,
                _ => Some((g, d)),
            });
        match nearest {
            Some((g, _)) => {
                let grp = &mut groups[g];
                grp.members.push(i);
                sums[g].0 += p.lat;
                sums[g].1 += p.lon;
                let n = grp.members.len() as f64;
                grp.lat = sums[g].0 / n;
                grp.lon = sums[g].1 / n;
            }
            None => {
                groups.push(Group { members: vec![i], lat: p.lat, lon: p.lon });
                sums.push((p.lat, p.lon));
            }
        }
    }
    groups.retain_mut(|g| g.trim(traces, params.max_radius));

    loop {
        let mut closest: Option<(usize, usize, f64)> = None;
        for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                let d = haversine(groups[a].lat, groups[a].lon, groups[b].lat, groups[b].lon);
                if d < params.min_dist && closest.map_or(true, |(_, _, bd)| d < bd) {
                    closest = Some((a, b, d));
                }
            }
        }
        let Some((a, b, _)) = closest else { break };
        let absorbed = groups.remove(b);
        groups[a].members.extend(absorbed.members);
        groups[a].members.sort_unstable();
        if !groups[a].trim(traces, params.max_radius) {
            groups.remove(a);
        }
    }

    let mut owner = vec![usize::MAX; pts.len()];
    for (g, grp) in groups.iter().enumerate() {
        for &i in &grp.members {
            owner[i] = g;
        }
    }
    let mut stay = vec![0.0; groups.len()];
    for i in 0..pts.len().saturating_sub(1) {
        if owner[i] != usize::MAX && stationary[i + 1] && pts[i + 1].user == pts[i].user {
            stay[owner[i]] += pts[i + 1].t - pts[i].t;
        }
    }

    let mut pois: Vec<PoiCluster> = groups
        .into_iter()
        .zip(stay)
        .filter(|(_, secs)| secs / 3600.0 >= params.min_stay_hours)
        .map(|(g, secs)| {
            let radius = g.members.iter().map(|&i| haversine(g.lat, g.lon, pts[i].lat, pts[i].lon)).fold(0.0, f64::max);
            PoiCluster {
                members: g.members,
                lat: g.lat,
                lon: g.lon,
                radius,
                stay_hours: secs / 3600.0,
                area: PI * radius.max(MIN_POI_RADIUS_M).powi(2),
            }
        })
        .collect();
    pois.sort_by_key(|p| p.members[0]);
    log::info!("extracted {} POIs from {} samples", pois.len(), pts.len());
    Ok(pois)
}
