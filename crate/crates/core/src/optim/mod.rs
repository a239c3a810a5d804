//! First-party optimization: a dense revised simplex LP solver and a
//! conditional-gradient concave maximizer that uses it as linear oracle.

mod conditional_gradient;
mod lp;
mod simplex;

pub use conditional_gradient::{
    maximize_concave, ConcaveMaximum, ConcaveObjective, LinearEntropy, DEFAULT_ITERATIONS, GAP_TOLERANCE,
};
pub use lp::{LinearProgram, LpSolution, LpStatus};
pub use simplex::{solve_lp, FEASIBILITY_TOL, OPTIMALITY_TOL};
