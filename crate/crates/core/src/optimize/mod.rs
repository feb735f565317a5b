//! Solvers behind the cost reductions: a dense simplex for the
//! epsilon-insensitive programs and an SPD quadratic minimizer.

mod quadratic;
mod simplex;

pub use quadratic::{minimize_quadratic, quadratic_value};
pub use simplex::{solve_lp, solve_lp_with, LinearProgram, LpSolution, LpStatus, PivotRule, Route, SimplexOptions};
