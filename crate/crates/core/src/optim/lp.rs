//! Linear-program model, solution record and the plain-text dump format.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `min c·x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lower <= x <= upper`.
///
/// Rows are dense. Bounds default to `[0, +inf)`; use `f64::NEG_INFINITY`
/// / `f64::INFINITY` for free directions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(c: Vec<f64>) -> Self {
        let d = c.len();
        Self {
            c,
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            a_ub: Vec::new(),
            b_ub: Vec::new(),
            lower: vec![0.0; d],
            upper: vec![f64::INFINITY; d],
        }
    }

    /// A feasibility problem (zero objective) over `d` variables.
    pub fn feasibility(d: usize) -> Self {
        Self::new(vec![0.0; d])
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.a_eq.len() + self.a_ub.len()
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self
    }

    pub fn add_ub(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.num_vars();
        let dim = |what: &str, got: usize, want: usize| -> Result<()> {
            if got == want {
                Ok(())
            } else {
                Err(Error::Dimension(format!("{what}: expected {want}, got {got}")))
            }
        };
        dim("b_eq length", self.b_eq.len(), self.a_eq.len())?;
        dim("b_ub length", self.b_ub.len(), self.a_ub.len())?;
        dim("lower bounds", self.lower.len(), d)?;
        dim("upper bounds", self.upper.len(), d)?;
        for row in self.a_eq.iter().chain(self.a_ub.iter()) {
            dim("constraint row", row.len(), d)?;
        }
        let finite = self
            .c
            .iter()
            .chain(self.a_eq.iter().flatten())
            .chain(self.a_ub.iter().flatten())
            .chain(self.b_eq.iter())
            .chain(self.b_ub.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("LP coefficients must be finite".into()));
        }
        if self.lower.iter().any(|v| v.is_nan() || *v == f64::INFINITY)
            || self.upper.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY)
        {
            return Err(Error::InvalidArgument("invalid variable bound".into()));
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let mut worst = 0.0_f64;
        for (row, rhs) in self.a_eq.iter().zip(&self.b_eq) {
            worst = worst.max((dot(row) - rhs).abs());
        }
        for (row, rhs) in self.a_ub.iter().zip(&self.b_ub) {
            worst = worst.max(dot(row) - rhs);
        }
        for ((v, lo), hi) in x.iter().zip(&self.lower).zip(&self.upper) {
            worst = worst.max(lo - v).max(v - hi);
        }
        worst
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Plain-text dump for cross-checking with external solvers.
    ///
    /// ```text
    /// lp-dump v1
    /// vars <d>
    /// obj <c_1> ... <c_d>
    /// bound <j> <lower> <upper>        (only non-default bounds)
    /// eq <a_1> ... <a_d> = <rhs>
    /// ub <a_1> ... <a_d> <= <rhs>
    /// end
    /// ```
    ///
    /// Numbers use 17 significant digits; infinities print as `inf`/`-inf`.
    pub fn dump_text(&self) -> String {
        let num = |v: f64| -> String {
            if v == f64::INFINITY {
                "inf".into()
            } else if v == f64::NEG_INFINITY {
                "-inf".into()
            } else {
                format!("{v:.16e}")
            }
        };
        let join = |row: &[f64]| row.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ");
        let mut out = String::from("lp-dump v1\n");
        let _ = writeln!(out, "vars {}", self.num_vars());
        let _ = writeln!(out, "obj {}", join(&self.c));
        for j in 0..self.num_vars() {
            if self.lower[j] != 0.0 || self.upper[j] != f64::INFINITY {
                let _ = writeln!(out, "bound {j} {} {}", num(self.lower[j]), num(self.upper[j]));
            }
        }
        for (row, rhs) in self.a_eq.iter().zip(&self.b_eq) {
            let _ = writeln!(out, "eq {} = {}", join(row), num(*rhs));
        }
        for (row, rhs) in self.a_ub.iter().zip(&self.b_ub) {
            let _ = writeln!(out, "ub {} <= {}", join(row), num(*rhs));
        }
        out.push_str("end\n");
        out
    }

    /// Parses the format written by [`LinearProgram::dump_text`].
    pub fn parse_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(format!("lp dump: {msg}"));
        let num = |tok: &str| -> Result<f64> {
            match tok {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                t => t.parse::<f64>().map_err(|e| bad(format!("bad number {t:?}: {e}"))),
            }
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("lp-dump v1") {
            return Err(bad("missing header".into()));
        }
        let mut lp: Option<LinearProgram> = None;
        let mut ended = false;
        for line in lines {
            let mut toks = line.split_whitespace();
            let tag = toks.next().unwrap_or_default();
            let rest: Vec<&str> = toks.collect();
            match tag {
                "vars" => {
                    let d: usize = rest
                        .first()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad("bad vars line".into()))?;
                    lp = Some(LinearProgram::feasibility(d));
                }
                "obj" | "bound" | "eq" | "ub" => {
                    let lp = lp.as_mut().ok_or_else(|| bad("vars line must come first".into()))?;
                    match tag {
                        "obj" => {
                            lp.c = rest.iter().map(|t| num(t)).collect::<Result<_>>()?;
                        }
                        "bound" => {
                            if rest.len() != 3 {
                                return Err(bad("bound needs 3 fields".into()));
                            }
                            let j: usize = rest[0].parse().map_err(|_| bad("bad bound index".into()))?;
                            if j >= lp.num_vars() {
                                return Err(bad("bound index out of range".into()));
                            }
                            lp.set_bounds(j, num(rest[1])?, num(rest[2])?);
                        }
                        _ => {
                            let (op, want) = if tag == "eq" { ("=", true) } else { ("<=", false) };
                            let pos = rest
                                .iter()
                                .position(|t| *t == op)
                                .ok_or_else(|| bad(format!("missing {op}")))?;
                            let row = rest[..pos].iter().map(|t| num(t)).collect::<Result<Vec<_>>>()?;
                            let rhs = num(rest.get(pos + 1).ok_or_else(|| bad("missing rhs".into()))?)?;
                            if want {
                                lp.add_eq(row, rhs);
                            } else {
                                lp.add_ub(row, rhs);
                            }
                        }
                    }
                }
                "end" => {
                    ended = true;
                    break;
                }
                other => return Err(bad(format!("unknown line tag {other:?}"))),
            }
        }
        if !ended {
            return Err(bad("missing end".into()));
        }
        let lp = lp.ok_or_else(|| bad("missing vars".into()))?;
        lp.validate()?;
        Ok(lp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Pivot budget exhausted before reaching a verdict.
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point. Meaningful only when `status` is `Optimal`.
    pub x: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
