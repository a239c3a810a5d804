//! Writes the bundled synthetic trace file: one user alternating between two
//! places about 10 km apart along a scripted itinerary, 10 000 rows.
//!
//! Usage: `cargo run -p lppm-core --example gen_synthetic_traces -- data/synthetic_traces.csv`

use std::fs::File;
use std::io::{BufWriter, Write};

use lppm_core::mobility::geo::{haversine, offset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ROWS: usize = 10_000;
const START: i64 = 1_224_720_000;
const ORIGIN: (f64, f64) = (39.9800, 116.3100);
/// Visits in order; `0` is place A, `1` place B.
const ITINERARY: [usize; 12] = [0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0, 0];
const STAY_SAMPLES: usize = 800;
const STAY_STEP_S: i64 = 300;
const TRAVEL_STEP_S: i64 = 60;
const TRAVEL_STEP_M: f64 = 600.0;
const JITTER_M: f64 = 5.0;

struct Writer {
    rows: Vec<(f64, f64, i64)>,
    t: i64,
}

impl Writer {
    fn push(&mut self, lat: f64, lon: f64, dt: i64) {
        self.t += dt;
        self.rows.push((lat, lon, self.t));
    }
}

fn place(i: usize) -> (f64, f64) {
    if i == 0 {
        (0.0, 0.0)
    } else {
        (6_000.0, 8_000.0)
    }
}

/// Straight-line travel sampled every minute, excluding both endpoints.
fn travel(w: &mut Writer, from: (f64, f64), to: (f64, f64)) {
    let len = (to.0 - from.0).hypot(to.1 - from.1);
    let steps = (len / TRAVEL_STEP_M).ceil() as usize;
    for k in 1..steps {
        let f = k as f64 / steps as f64;
        let (lat, lon) = offset(ORIGIN.0, ORIGIN.1, from.0 + f * (to.0 - from.0), from.1 + f * (to.1 - from.1));
        w.push(lat, lon, TRAVEL_STEP_S);
    }
    w.t += TRAVEL_STEP_S;
}

fn main() -> std::io::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "data/synthetic_traces.csv".into());
    let mut rng = ChaCha8Rng::seed_from_u64(2008);
    let mut w = Writer { rows: Vec::with_capacity(ROWS), t: START - STAY_STEP_S };
    let mut dt = STAY_STEP_S;
    for (v, &p) in ITINERARY.iter().enumerate() {
        if v > 0 {
            let prev = place(ITINERARY[v - 1]);
            if prev == place(p) {
                // a round trip 3 km north and back
                let turn = (prev.0 + 3_000.0, prev.1);
                travel(&mut w, prev, turn);
                w.t -= TRAVEL_STEP_S;
                let (lat, lon) = offset(ORIGIN.0, ORIGIN.1, turn.0, turn.1);
                w.push(lat, lon, TRAVEL_STEP_S);
                travel(&mut w, turn, prev);
            } else {
                travel(&mut w, prev, place(p));
            }
            dt = 0;
        }
        let n = if v + 1 == ITINERARY.len() { ROWS - w.rows.len() } else { STAY_SAMPLES };
        for _ in 0..n {
            let (dn, de) = (rng.gen_range(-JITTER_M..=JITTER_M), rng.gen_range(-JITTER_M..=JITTER_M));
            let (lat, lon) = offset(ORIGIN.0, ORIGIN.1, place(p).0 + dn, place(p).1 + de);
            w.push(lat, lon, dt);
            dt = STAY_STEP_S;
        }
    }
    assert_eq!(w.rows.len(), ROWS);

    let mut f = BufWriter::new(File::create(&out)?);
    writeln!(f, "lat,lon,timestamp")?;
    for (lat, lon, t) in &w.rows {
        writeln!(f, "{lat:.7},{lon:.7},{t}")?;
    }
    let (a, b) = (offset(ORIGIN.0, ORIGIN.1, 0.0, 0.0), offset(ORIGIN.0, ORIGIN.1, 6_000.0, 8_000.0));
    eprintln!("wrote {ROWS} rows to {out}; places {:.0} m apart", haversine(a.0, a.1, b.0, b.1));
    Ok(())
}
