//! File formats: MDP and synthesis-result documents (JSON with canonical
//! float formatting) and the CSV series written by the experiment runner.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which round
//! trips every `f64` exactly, so load/save cycles are byte-stable.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::adversary::Belief;
use crate::error::{Error, Result};
use crate::mdp::{ActionMeta, Distribution, Mdp, OccupancyMeasure, Policy, StateMeta};
use crate::metrics::{entropy, expected_inference_error, max_dp_ratio, secret_mass, DistanceMatrix, PrivacySpec};
use crate::mobility::{CloakRegion, PoiCluster};
use crate::synthesis::{Certificate, Diagnostics, SynthesisResult};

struct CanonicalFloats<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl Formatter for CanonicalFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

/// Serializes with two-space indentation and canonical floats.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFloats(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: &[Vec<f64>], shape: (usize, usize), what: &str) -> Result<Array2<f64>> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(Error::Dimension(format!("{what} must be {} x {}", shape.0, shape.1)));
    }
    Ok(Array2::from_shape_fn(shape, |(i, j)| rows[i][j]))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpDoc {
    n_states: usize,
    n_actions: usize,
    available: Vec<Vec<usize>>,
    transition: Vec<Vec<Vec<f64>>>,
    p0: Vec<f64>,
    utility: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_meta: Option<Vec<StateMeta>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action_meta: Option<Vec<ActionMeta>>,
}

pub fn mdp_to_string(mdp: &Mdp) -> Result<String> {
    let doc = MdpDoc {
        n_states: mdp.n_states(),
        n_actions: mdp.n_actions(),
        available: mdp.availability().to_vec(),
        transition: mdp.transitions().iter().map(rows).collect(),
        p0: mdp.p0().to_vec(),
        utility: rows(mdp.utility()),
        state_meta: mdp.state_meta().map(<[_]>::to_vec),
        action_meta: mdp.action_meta().map(<[_]>::to_vec),
    };
    to_canonical_json(&doc)
}

pub fn mdp_from_str(text: &str) -> Result<Mdp> {
    let doc: MdpDoc = serde_json::from_str(text)?;
    let (n, m) = (doc.n_states, doc.n_actions);
    if doc.transition.len() != m {
        return Err(Error::Dimension(format!("{} transition matrices for {m} actions", doc.transition.len())));
    }
    if doc.p0.len() != n {
        return Err(Error::Dimension(format!("p0 has {} entries for {n} states", doc.p0.len())));
    }
    let transition =
        doc.transition.iter().enumerate().map(|(a, t)| from_rows(t, (n, n), &format!("transition[{a}]"))).collect::<Result<_>>()?;
    let utility = from_rows(&doc.utility, (n, m), "utility")?;
    Mdp::new(transition, doc.available, Array1::from(doc.p0), utility)?.with_meta(doc.state_meta, doc.action_meta)
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(_) => e,
        other => Error::Parse { path: path.to_path_buf(), message: other.to_string() },
    })
}

pub fn save_mdp(mdp: &Mdp, path: &Path) -> Result<()> {
    fs::write(path, mdp_to_string(mdp)?)?;
    Ok(())
}

pub fn load_mdp(path: &Path) -> Result<Mdp> {
    let text = fs::read_to_string(path)?;
    with_path(path, mdp_from_str(&text))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResultDoc {
    v: f64,
    policy: Vec<Vec<f64>>,
    theta: Vec<Vec<f64>>,
    p_inf: Vec<f64>,
    certificate: Option<Certificate>,
    b_inf: Option<Vec<f64>>,
    diagnostics: Diagnostics,
}

pub fn result_to_string(result: &SynthesisResult) -> Result<String> {
    let doc = ResultDoc {
        v: result.v,
        policy: rows(result.policy.matrix()),
        theta: rows(result.theta.matrix()),
        p_inf: result.p_inf.as_array().to_vec(),
        certificate: result.certificate.clone(),
        b_inf: result.b_inf.as_ref().map(|b| b.as_array().to_vec()),
        diagnostics: result.diagnostics.clone(),
    };
    to_canonical_json(&doc)
}

/// Parses a result document, validating its matrices against `mdp`.
pub fn result_from_str(text: &str, mdp: &Mdp) -> Result<SynthesisResult> {
    let doc: ResultDoc = serde_json::from_str(text)?;
    let shape = (mdp.n_states(), mdp.n_actions());
    let vector = |v: Vec<f64>, what: &str| {
        if v.len() != shape.0 {
            return Err(Error::Dimension(format!("{what} has {} entries for {} states", v.len(), shape.0)));
        }
        Distribution::computed(Array1::from(v))
    };
    Ok(SynthesisResult {
        theta: OccupancyMeasure::new(from_rows(&doc.theta, shape, "theta")?, mdp)?,
        policy: Policy::new(from_rows(&doc.policy, shape, "policy")?, mdp)?,
        p_inf: vector(doc.p_inf, "p_inf")?,
        v: doc.v,
        certificate: doc.certificate,
        b_inf: doc.b_inf.map(|b| vector(b, "b_inf")).transpose()?,
        diagnostics: doc.diagnostics,
    })
}

pub fn save_result(result: &SynthesisResult, path: &Path) -> Result<()> {
    fs::write(path, result_to_string(result)?)?;
    Ok(())
}

pub fn load_result(path: &Path, mdp: &Mdp) -> Result<SynthesisResult> {
    let text = fs::read_to_string(path)?;
    with_path(path, result_from_str(&text, mdp))
}

/// Shortest round-trip decimal, with `inf` for infinities.
fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

/// Columns `t, b_<label>..., secret_mass`; one row per belief.
pub fn write_beliefs_csv<W: Write>(out: W, labels: &[String], beliefs: &[Belief], spec: &PrivacySpec) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(labels.iter().map(|l| format!("b_{l}")));
    header.push("secret_mass".into());
    w.write_record(&header)?;
    for (t, b) in beliefs.iter().enumerate() {
        if b.len() != labels.len() {
            return Err(Error::Dimension(format!("belief of length {} for {} labels", b.len(), labels.len())));
        }
        let mut row = vec![t.to_string()];
        row.extend(b.as_array().iter().map(|&x| num(x)));
        row.push(num(secret_mass(b, spec)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t, entropy, exp_err, max_dp_ratio, secret_mass`. The ratio
/// compares `b_t` with `b_{t-1}` and is empty at `t = 0`.
pub fn write_metrics_csv<W: Write>(
    out: W,
    beliefs: &[Belief],
    distances: &DistanceMatrix,
    spec: &PrivacySpec,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "entropy", "exp_err", "max_dp_ratio", "secret_mass"])?;
    for (t, b) in beliefs.iter().enumerate() {
        let ratio = if t == 0 { String::new() } else { num(max_dp_ratio(&beliefs[t - 1], b)?) };
        let (err, _) = expected_inference_error(b, distances)?;
        w.write_record([t.to_string(), num(entropy(b)), num(err), ratio, num(secret_mass(b, spec))])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t, v_hat`.
pub fn write_quality_csv<W: Write>(out: W, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "v_hat"])?;
    for (t, v) in values.iter().enumerate() {
        w.write_record([t.to_string(), num(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t, state, action` with MDP labels.
pub fn write_path_csv<W: Write>(out: W, mdp: &Mdp, path: &[(usize, usize)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "state", "action"])?;
    for (t, &(s, a)) in path.iter().enumerate() {
        w.write_record([t.to_string(), mdp.state_label(s), mdp.action_label(a)])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per POI (`s<i>`) followed by one per cloak (`a<l>`), columns
/// `id, lat, lon, radius, stay_hours, covered_pois`. Cloaks leave
/// `stay_hours` empty; covered POIs are `;`-separated ids.
pub fn write_poi_summary_csv<W: Write>(out: W, pois: &[PoiCluster], cloaks: &[CloakRegion]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "lat", "lon", "radius", "stay_hours", "covered_pois"])?;
    for (i, p) in pois.iter().enumerate() {
        w.write_record([format!("s{}", i + 1), num(p.lat), num(p.lon), num(p.radius), num(p.stay_hours), String::new()])?;
    }
    for (a, c) in cloaks.iter().enumerate() {
        let covered: Vec<String> = c.covered.iter().map(|s| format!("s{}", s + 1)).collect();
        w.write_record([format!("a{}", a + 1), num(c.lat), num(c.lon), num(c.radius), String::new(), covered.join(";")])?;
    }
    w.flush()?;
    Ok(())
}
