//! GPS trace ingestion from Geolife `.plt` files and plain CSV.

use std::fs;
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    /// Geolife trajectory: 6 header lines, then
    /// `lat,lon,0,altitude,days,date,time`.
    Plt,
    /// Header `lat,lon,timestamp` (seconds since the Unix epoch), with an
    /// optional fourth `user` column.
    Csv,
}

impl TraceFormat {
    /// Guesses the format from the file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "plt" => Some(Self::Plt),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub lat: f64,
    pub lon: f64,
    /// Seconds since the Unix epoch.
    pub t: f64,
    /// Index into [`TraceDataset::users`].
    pub user: usize,
}

/// Samples grouped by user, each user's samples in strictly increasing
/// time order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceDataset {
    points: Vec<TracePoint>,
    users: Vec<String>,
    skipped: usize,
}

impl TraceDataset {
    /// Builds a dataset from `(user, lat, lon, t)` rows in file order.
    /// Rows with out-of-range coordinates or a timestamp not after the
    /// user's previous sample are skipped and counted.
    pub fn from_rows<I, S>(rows: I) -> Self
    where
        I: IntoIterator<Item = (S, f64, f64, f64)>,
        S: AsRef<str>,
    {
        let mut ds = Self::default();
        let mut per_user: Vec<Vec<TracePoint>> = Vec::new();
        for (user, lat, lon, t) in rows {
            let u = match ds.users.iter().position(|x| x == user.as_ref()) {
                Some(u) => u,
                None => {
                    ds.users.push(user.as_ref().to_string());
                    per_user.push(Vec::new());
                    ds.users.len() - 1
                }
            };
            let valid = (-90.0..=90.0).contains(&lat)
                && (-180.0..=180.0).contains(&lon)
                && t.is_finite()
                && per_user[u].last().map_or(true, |prev| prev.t < t);
            if valid {
                per_user[u].push(TracePoint { lat, lon, t, user: u });
            } else {
                ds.skipped += 1;
            }
        }
        ds.points = per_user.into_iter().flatten().collect();
        ds
    }

    pub fn points(&self) -> &[TracePoint] {
        &self.points
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Rows dropped as malformed while parsing.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Appends another dataset, merging users by name.
    pub fn extend(&mut self, other: TraceDataset) {
        let rows: Vec<(String, f64, f64, f64)> = self
            .points
            .iter()
            .map(|p| (self.users[p.user].clone(), p.lat, p.lon, p.t))
            .chain(other.points.iter().map(|p| (other.users[p.user].clone(), p.lat, p.lon, p.t)))
            .collect();
        let skipped = self.skipped + other.skipped;
        *self = Self::from_rows(rows);
        self.skipped += skipped;
    }

    /// SHA-256 over the canonical `lat,lon,t,user` lines (7 decimals for
    /// coordinates, 3 for time).
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.points {
            h.update(format!("{:.7},{:.7},{:.3},{}\n", p.lat, p.lon, p.t, self.users[p.user]).as_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Reads one trace file. The user key is the Geolife user directory for
/// `<user>/Trajectory/*.plt` paths, the `user` column for CSV when present,
/// and `"0"` otherwise.
pub fn parse_traces(path: &Path, format: TraceFormat) -> Result<TraceDataset> {
    let text = fs::read_to_string(path)?;
    let (rows, bad, data_lines) = match format {
        TraceFormat::Plt => parse_plt(&text, &plt_user(path)),
        TraceFormat::Csv => parse_csv(&text, path)?,
    };
    let mut ds = TraceDataset::from_rows(rows);
    ds.skipped += bad;
    if data_lines == 0 {
        log::warn!("{}: no data rows", path.display());
    } else if ds.is_empty() {
        return Err(Error::Parse { path: path.to_path_buf(), message: format!("all {data_lines} rows are malformed") });
    }
    if ds.skipped > 0 {
        log::warn!("{}: skipped {} malformed rows of {data_lines}", path.display(), ds.skipped);
    }
    Ok(ds)
}

fn plt_user(path: &Path) -> String {
    let parent = path.parent();
    if parent.and_then(|p| p.file_name()).is_some_and(|n| n == "Trajectory") {
        if let Some(user) = parent.and_then(Path::parent).and_then(|p| p.file_name()) {
            return user.to_string_lossy().into_owned();
        }
    }
    "0".into()
}

type Rows = Vec<(String, f64, f64, f64)>;

fn parse_plt(text: &str, user: &str) -> (Rows, usize, usize) {
    let mut rows = Vec::new();
    let mut bad = 0;
    let mut lines = 0;
    for line in text.lines().skip(6) {
        if line.trim().is_empty() {
            continue;
        }
        lines += 1;
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (|| {
            let lat: f64 = f.first()?.parse().ok()?;
            let lon: f64 = f.get(1)?.parse().ok()?;
            let stamp = format!("{} {}", f.get(5)?, f.get(6)?);
            let t = NaiveDateTime::parse_from_str(&stamp, "%Y-%m-%d %H:%M:%S").ok()?.and_utc().timestamp();
            Some((lat, lon, t as f64))
        })();
        match parsed {
            Some((lat, lon, t)) => rows.push((user.to_string(), lat, lon, t)),
            None => bad += 1,
        }
    }
    (rows, bad, lines)
}

fn parse_csv(text: &str, path: &Path) -> Result<(Rows, usize, usize)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(lat_i), Some(lon_i), Some(t_i)) = (col("lat"), col("lon"), col("timestamp")) else {
        return Err(Error::Parse { path: path.to_path_buf(), message: "header must contain lat,lon,timestamp".into() });
    };
    let user_i = col("user");
    let mut rows = Vec::new();
    let mut bad = 0;
    let mut lines = 0;
    for record in reader.records() {
        lines += 1;
        let parsed = record.ok().and_then(|r| {
            let lat: f64 = r.get(lat_i)?.parse().ok()?;
            let lon: f64 = r.get(lon_i)?.parse().ok()?;
            let t: f64 = r.get(t_i)?.parse().ok()?;
            let user = user_i.and_then(|i| r.get(i)).unwrap_or("0").to_string();
            Some((user, lat, lon, t))
        });
        match parsed {
            Some(row) => rows.push(row),
            None => bad += 1,
        }
    }
    Ok((rows, bad, lines))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        fs::File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn empty_csv_is_an_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "empty.csv", "lat,lon,timestamp\n");
        let ds = parse_traces(&path, TraceFormat::Csv).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn three_rows_are_preserved_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let body = "lat,lon,timestamp\n41.7,-86.24,1000\n41.70001,-86.24002,1060.5\n41.8,-86.1,2000\n";
        let ds = parse_traces(&write(dir.path(), "t.csv", body), TraceFormat::Csv).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.points()[1], TracePoint { lat: 41.70001, lon: -86.24002, t: 1060.5, user: 0 });
        assert_eq!(ds.skipped(), 0);
    }

    #[test]
    fn malformed_rows_are_skipped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let body = "lat,lon,timestamp\n41.7,-86.24,1000\nabc,1,2\n95.0,0,3000\n41.7,-86.24,900\n41.7,-86.24,1100\n";
        let ds = parse_traces(&write(dir.path(), "t.csv", body), TraceFormat::Csv).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.skipped(), 3);
        let all_bad = write(dir.path(), "bad.csv", "lat,lon,timestamp\nx,y,z\n");
        assert!(matches!(parse_traces(&all_bad, TraceFormat::Csv), Err(Error::Parse { .. })));
        let no_header = write(dir.path(), "nh.csv", "a,b\n1,2\n");
        assert!(parse_traces(&no_header, TraceFormat::Csv).is_err());
        assert!(parse_traces(&dir.path().join("missing.csv"), TraceFormat::Csv).is_err());
    }

    #[test]
    fn plt_files_use_geolife_layout() {
        let dir = tempfile::tempdir().unwrap();
        let traj = dir.path().join("114").join("Trajectory");
        fs::create_dir_all(&traj).unwrap();
        let body = "Geolife trajectory\nWGS 84\nAltitude is in Feet\nReserved 3\n0,2,255,My Track,0,0,2,8421376\n0\n\
                    39.984702,116.318417,0,492,39744.1201851852,2008-10-23,02:53:04\n\
                    39.984683,116.31845,0,492,39744.1202546296,2008-10-23,02:53:10\n";
        let ds = parse_traces(&write(&traj, "20081023025304.plt", body), TraceFormat::Plt).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.users(), ["114"]);
        assert_eq!(ds.points()[0].t, 1_224_730_384.0);
        assert_eq!(ds.points()[1].t - ds.points()[0].t, 6.0);
        assert_eq!(ds.points()[0].lat, 39.984702);
    }

    #[test]
    fn users_are_grouped_and_checksum_is_stable() {
        let ds = TraceDataset::from_rows([("b", 1.0, 1.0, 1.0), ("a", 2.0, 2.0, 1.0), ("b", 1.0, 1.0, 2.0)]);
        assert_eq!(ds.users(), ["b", "a"]);
        assert_eq!(ds.points().iter().map(|p| p.user).collect::<Vec<_>>(), vec![0, 0, 1]);
        assert_eq!(ds.checksum(), ds.clone().checksum());
        assert_eq!(ds.checksum().len(), 64);
    }
}
