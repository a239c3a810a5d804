//! Dense two-phase revised simplex with Bland's anti-cycling rule.
//!
//! The basis inverse is kept explicitly and updated by elementary row
//! operations after each pivot, with a fresh Gauss-Jordan inversion every
//! [`REFACTOR_EVERY`] pivots and before the final point is read off.
//! Pivoting is a pure function of the input, so identical programs always
//! follow identical pivot sequences.

use crate::error::Result;
use crate::linalg::invert_row_major;

use super::lp::{LinearProgram, LpSolution, LpStatus};

pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const OPTIMALITY_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;

/// How an original variable maps onto nonnegative standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    Fixed(f64),
    /// x = lo + y
    Shift { col: usize, lo: f64 },
    /// x = hi - y
    Mirror { col: usize, hi: f64 },
    /// x = y+ - y-
    Split { pos: usize, neg: usize },
}

/// `min c·y  s.t.  A y = b,  y >= 0,  b >= 0` plus the bookkeeping to map
/// a solution back.
struct StandardForm {
    m: usize,
    ncols: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    cost: Vec<f64>,
    n_struct: usize,
    /// First artificial column; everything from here on is artificial.
    art_start: usize,
    initial_basis: Vec<usize>,
    vars: Vec<VarMap>,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Option<Self> {
        let d = lp.num_vars();
        let mut vars = Vec::with_capacity(d);
        let mut n_struct = 0;
        let mut bounded_shift = Vec::new();
        for j in 0..d {
            let (lo, hi) = (lp.lower[j], lp.upper[j]);
            if lo > hi {
                return None;
            }
            let map = if lo.is_finite() && hi.is_finite() && lo == hi {
                VarMap::Fixed(lo)
            } else if lo.is_finite() {
                let col = n_struct;
                n_struct += 1;
                if hi.is_finite() {
                    bounded_shift.push((col, hi - lo));
                }
                VarMap::Shift { col, lo }
            } else if hi.is_finite() {
                let col = n_struct;
                n_struct += 1;
                VarMap::Mirror { col, hi }
            } else {
                let pos = n_struct;
                n_struct += 2;
                VarMap::Split { pos, neg: pos + 1 }
            };
            vars.push(map);
        }

        // rows: (dense structural coeffs, rhs, has_slack)
        let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
        let substitute = |coeffs: &[f64], rhs: f64, slack: bool, rows: &mut Vec<(Vec<f64>, f64, bool)>| {
            let mut row = vec![0.0; n_struct];
            let mut rhs = rhs;
            for (j, &a) in coeffs.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                match vars[j] {
                    VarMap::Fixed(v) => rhs -= a * v,
                    VarMap::Shift { col, lo } => {
                        row[col] += a;
                        rhs -= a * lo;
                    }
                    VarMap::Mirror { col, hi } => {
                        row[col] -= a;
                        rhs -= a * hi;
                    }
                    VarMap::Split { pos, neg } => {
                        row[pos] += a;
                        row[neg] -= a;
                    }
                }
            }
            rows.push((row, rhs, slack));
        };
        for (row, rhs) in lp.a_eq.iter().zip(&lp.b_eq) {
            substitute(row, *rhs, false, &mut rows);
        }
        for (row, rhs) in lp.a_ub.iter().zip(&lp.b_ub) {
            substitute(row, *rhs, true, &mut rows);
        }
        for &(col, width) in &bounded_shift {
            let mut row = vec![0.0; n_struct];
            row[col] = 1.0;
            rows.push((row, width, true));
        }

        let m = rows.len();
        let n_slack = rows.iter().filter(|r| r.2).count();
        // One artificial per row that cannot start with its slack basic.
        let needs_art: Vec<bool> = rows.iter().map(|(_, rhs, slack)| !(*slack && *rhs >= 0.0)).collect();
        let n_art = needs_art.iter().filter(|v| **v).count();
        let art_start = n_struct + n_slack;
        let ncols = art_start + n_art;

        let mut a = vec![0.0; m * ncols];
        let mut b = vec![0.0; m];
        let mut initial_basis = vec![0; m];
        let mut slack_col = n_struct;
        let mut art_col = art_start;
        for (i, (row, rhs, slack)) in rows.into_iter().enumerate() {
            let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
            for (j, v) in row.into_iter().enumerate() {
                a[i * ncols + j] = sign * v;
            }
            b[i] = sign * rhs;
            if slack {
                a[i * ncols + slack_col] = sign;
                if !needs_art[i] {
                    initial_basis[i] = slack_col;
                }
                slack_col += 1;
            }
            if needs_art[i] {
                a[i * ncols + art_col] = 1.0;
                initial_basis[i] = art_col;
                art_col += 1;
            }
        }

        let mut cost = vec![0.0; ncols];
        for (j, map) in vars.iter().enumerate() {
            let c = lp.c[j];
            match *map {
                VarMap::Fixed(_) => {}
                VarMap::Shift { col, .. } => cost[col] += c,
                VarMap::Mirror { col, .. } => cost[col] -= c,
                VarMap::Split { pos, neg } => {
                    cost[pos] += c;
                    cost[neg] -= c;
                }
            }
        }

        Some(Self { m, ncols, a, b, cost, n_struct, art_start, initial_basis, vars })
    }

    fn recover(&self, y: &[f64]) -> Vec<f64> {
        self.vars
            .iter()
            .map(|map| match *map {
                VarMap::Fixed(v) => v,
                VarMap::Shift { col, lo } => lo + y[col],
                VarMap::Mirror { col, hi } => hi - y[col],
                VarMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect()
    }
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Revised<'a> {
    sf: &'a StandardForm,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    cap: usize,
}

impl<'a> Revised<'a> {
    fn new(sf: &'a StandardForm, cap: usize) -> Self {
        let m = sf.m;
        let basis = sf.initial_basis.clone();
        let mut is_basic = vec![false; sf.ncols];
        for &j in &basis {
            is_basic[j] = true;
        }
        // The initial basis is a (signed) identity on slack/artificial columns.
        let mut binv = vec![0.0; m * m];
        for (i, &j) in basis.iter().enumerate() {
            binv[i * m + i] = 1.0 / sf.a[i * sf.ncols + j];
        }
        let xb = (0..m).map(|i| binv[i * m + i] * sf.b[i]).collect();
        Self { sf, basis, is_basic, binv, xb, since_refactor: 0, iterations: 0, cap }
    }

    fn refactor(&mut self) {
        let m = self.sf.m;
        if m == 0 {
            return;
        }
        let nc = self.sf.ncols;
        let mut bmat = vec![0.0; m * m];
        for i in 0..m {
            for (k, &j) in self.basis.iter().enumerate() {
                bmat[i * m + k] = self.sf.a[i * nc + j];
            }
        }
        // A singular refactor keeps the product-form inverse; it is only a
        // numerical refresh.
        if let Some(inv) = invert_row_major(&bmat, m) {
            self.binv = inv;
            for i in 0..m {
                self.xb[i] = (0..m).map(|k| self.binv[i * m + k] * self.sf.b[k]).sum();
            }
        }
        self.since_refactor = 0;
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let (m, nc) = (self.sf.m, self.sf.ncols);
        (0..m)
            .map(|i| (0..m).map(|k| self.binv[i * m + k] * self.sf.a[k * nc + j]).sum())
            .collect()
    }

    fn pivot(&mut self, r: usize, enter: usize, u: &[f64]) {
        let m = self.sf.m;
        let piv = u[r];
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        self.xb[r] /= piv;
        for i in 0..m {
            if i == r || u[i] == 0.0 {
                continue;
            }
            let f = u[i];
            for k in 0..m {
                self.binv[i * m + k] -= f * self.binv[r * m + k];
            }
            self.xb[i] -= f * self.xb[r];
        }
        self.is_basic[self.basis[r]] = false;
        self.basis[r] = enter;
        self.is_basic[enter] = true;
        self.iterations += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    /// Runs simplex iterations for `cost`; columns at or past `enter_limit`
    /// never enter the basis.
    fn run(&mut self, cost: &[f64], enter_limit: usize) -> PhaseOutcome {
        let (m, nc) = (self.sf.m, self.sf.ncols);
        loop {
            if self.iterations >= self.cap {
                return PhaseOutcome::IterationLimit;
            }
            // Simplex multipliers y = c_B^T B^-1.
            let mut y = vec![0.0; m];
            for (k, &j) in self.basis.iter().enumerate() {
                let cb = cost[j];
                if cb != 0.0 {
                    for i in 0..m {
                        y[i] += cb * self.binv[k * m + i];
                    }
                }
            }
            let mut reduced = cost[..enter_limit].to_vec();
            for i in 0..m {
                if y[i] != 0.0 {
                    let row = &self.sf.a[i * nc..i * nc + enter_limit];
                    for (d, a) in reduced.iter_mut().zip(row) {
                        *d -= y[i] * a;
                    }
                }
            }
            // Bland: lowest-index improving column.
            let enter = (0..enter_limit).find(|&j| !self.is_basic[j] && reduced[j] < -OPTIMALITY_TOL);
            let Some(enter) = enter else {
                return PhaseOutcome::Optimal;
            };
            let u = self.column(enter);
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                if u[i] > PIVOT_TOL {
                    let ratio = self.xb[i].max(0.0) / u[i];
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * br.abs().max(1.0);
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else {
                return PhaseOutcome::Unbounded;
            };
            self.pivot(r, enter, &u);
        }
    }

    /// Pivots zero-level artificials out of the basis where a real column
    /// can replace them. Rows where none can are redundant; their artificial
    /// stays basic at zero and never moves again.
    fn expel_artificials(&mut self) {
        let (m, nc) = (self.sf.m, self.sf.ncols);
        for r in 0..m {
            if self.basis[r] < self.sf.art_start {
                continue;
            }
            let candidate = (0..self.sf.art_start).find(|&j| {
                if self.is_basic[j] {
                    return false;
                }
                let v: f64 = (0..m).map(|k| self.binv[r * m + k] * self.sf.a[k * nc + j]).sum();
                v.abs() > PIVOT_TOL
            });
            if let Some(j) = candidate {
                let u = self.column(j);
                self.pivot(r, j, &u);
            }
        }
    }

    fn point(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.sf.ncols];
        for (i, &j) in self.basis.iter().enumerate() {
            y[j] = self.xb[i].max(0.0);
        }
        y
    }
}

/// Solves `lp`. Infeasibility, unboundedness and pivot-budget exhaustion are
/// reported through [`LpSolution::status`]; an `Err` means the program
/// itself is malformed.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let d = lp.num_vars();
    let cap = 50 * (d + lp.num_constraints()).max(1);
    let done = |status, x: Vec<f64>, iterations| {
        let objective = lp.objective_at(&x);
        let max_violation = lp.max_violation(&x);
        LpSolution { status, x, objective, max_violation, iterations }
    };

    let Some(sf) = StandardForm::build(lp) else {
        return Ok(done(LpStatus::Infeasible, vec![0.0; d], 0));
    };
    let mut rs = Revised::new(&sf, cap);

    if sf.art_start < sf.ncols {
        let mut phase1 = vec![0.0; sf.ncols];
        for c in &mut phase1[sf.art_start..] {
            *c = 1.0;
        }
        match rs.run(&phase1, sf.art_start) {
            PhaseOutcome::IterationLimit => {
                let x = sf.recover(&rs.point());
                return Ok(done(LpStatus::IterationLimit, x, rs.iterations));
            }
            // Phase 1 is bounded below by zero.
            PhaseOutcome::Unbounded | PhaseOutcome::Optimal => {}
        }
        rs.refactor();
        let infeas: f64 = rs
            .basis
            .iter()
            .zip(&rs.xb)
            .filter(|(j, _)| **j >= sf.art_start)
            .map(|(_, v)| v.max(0.0))
            .sum();
        let bscale = sf.b.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if infeas > FEASIBILITY_TOL * bscale {
            let x = sf.recover(&rs.point());
            return Ok(done(LpStatus::Infeasible, x, rs.iterations));
        }
        rs.expel_artificials();
    }

    let outcome = rs.run(&sf.cost, sf.art_start);
    rs.refactor();
    let x = sf.recover(&rs.point());
    let status = match outcome {
        PhaseOutcome::Optimal => LpStatus::Optimal,
        PhaseOutcome::Unbounded => LpStatus::Unbounded,
        PhaseOutcome::IterationLimit => LpStatus::IterationLimit,
    };
    debug_assert!(sf.n_struct <= sf.art_start);
    Ok(done(status, x, rs.iterations))
}
