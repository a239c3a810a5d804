//! Conditional-gradient (Frank-Wolfe) maximization of a concave function
//! over an LP-described polytope, using the simplex solver as the linear
//! oracle.
// Each step: linear maximization oracle, golden-section line search, convex combination.

use crate::error::{Error, Result};

use super::lp::{LinearProgram, LpStatus};
use super::simplex::solve_lp;

pub const DEFAULT_ITERATIONS: usize = 500;
pub const GAP_TOLERANCE: f64 = 1e-6;

/// A concave function with a (super)gradient.
pub trait ConcaveObjective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct ConcaveMaximum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Frank-Wolfe duality gap at `x`; an upper bound on `max f - f(x)`.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes `f` over the polytope of `feasible` (its objective is ignored).
///
/// Starts from `start` when given (it must be feasible) and otherwise from
/// a vertex found by the LP solver. Stops when the duality gap drops to
/// [`GAP_TOLERANCE`] or after `iters` iterations; the final gap is
/// reported either way.
pub fn maximize_concave<F: ConcaveObjective + ?Sized>(
    f: &F,
    feasible: &LinearProgram,
    start: Option<&[f64]>,
    iters: usize,
) -> Result<ConcaveMaximum> {
    let d = feasible.num_vars();
    let mut oracle = feasible.clone();
    let mut x = match start {
        Some(s) => {
            if s.len() != d {
                return Err(Error::Dimension(format!("start point has {} entries, expected {d}", s.len())));
            }
            s.to_vec()
        }
        None => {
            oracle.c = vec![0.0; d];
            let sol = solve_lp(&oracle)?;
            match sol.status {
                LpStatus::Optimal => sol.x,
                LpStatus::Infeasible => return Err(Error::Infeasible("empty polytope".into())),
                other => return Err(Error::Solver(format!("initial vertex search ended with {other:?}"))),
            }
        }
    };

    let mut grad = vec![0.0; d];
    let mut gap = f64::INFINITY;
    let mut it = 0;
    while it < iters {
        f.gradient(&x, &mut grad);
        oracle.c = grad.iter().map(|g| -g).collect();
        let vertex = solve_lp(&oracle)?;
        match vertex.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(Error::Infeasible("empty polytope".into())),
            other => return Err(Error::Solver(format!("linear oracle ended with {other:?}"))),
        }
        let dir: Vec<f64> = vertex.x.iter().zip(&x).map(|(s, xi)| s - xi).collect();
        gap = grad.iter().zip(&dir).map(|(g, di)| g * di).sum::<f64>();
        if gap <= GAP_TOLERANCE {
            break;
        }
        let step = line_search(f, &x, &dir);
        for (xi, di) in x.iter_mut().zip(&dir) {
            *xi += step * di;
        }
        it += 1;
    }
    if it == iters {
        f.gradient(&x, &mut grad);
        oracle.c = grad.iter().map(|g| -g).collect();
        let vertex = solve_lp(&oracle)?;
        if vertex.is_optimal() {
            gap = grad.iter().zip(vertex.x.iter().zip(&x)).map(|(g, (s, xi))| g * (s - xi)).sum();
        }
    }
    let value = f.value(&x);
    Ok(ConcaveMaximum { x, value, gap, iterations: it, converged: gap <= GAP_TOLERANCE })
}

/// Golden-section search for the best step in `[0, 1]` along `dir`.
fn line_search<F: ConcaveObjective + ?Sized>(f: &F, x: &[f64], dir: &[f64]) -> f64 {
    let at = |t: f64| -> f64 {
        let p: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + t * di).collect();
        f.value(&p)
    };
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (at(c), at(d));
    for _ in 0..80 {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = at(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = at(d);
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    // Endpoints are never probed by the bracket; check them explicitly.
    let candidates = [(0.0, at(0.0)), (mid, at(mid)), (1.0, at(1.0))];
    candidates
        .iter()
        .fold(candidates[0], |best, cur| if cur.1 > best.1 { *cur } else { best })
        .0
}

/// Shannon entropy (natural log) of a linear image `G x`, used as the
/// objective of the max-entropy obfuscation baseline.
pub struct LinearEntropy<'a> {
    /// Row-major `rows x d` matrix.
    pub g: &'a [f64],
    pub rows: usize,
}

impl LinearEntropy<'_> {
    fn image(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        (0..self.rows)
            .map(|i| self.g[i * d..(i + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl ConcaveObjective for LinearEntropy<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.image(x).iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()).sum()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let d = x.len();
        let dh: Vec<f64> = self.image(x).iter().map(|p| -(p.max(1e-300).ln() + 1.0)).collect();
        for (j, g) in grad.iter_mut().enumerate() {
            *g = (0..self.rows).map(|i| dh[i] * self.g[i * d + j]).sum();
        }
    }
}
