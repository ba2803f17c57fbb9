//! Self-contained LP and MILP solvers.
//!
//! [`solve_lp`] runs a bounded-variable primal simplex on a sparse LU
//! factorized basis; [`solve_milp`] wraps it in best-bound branch-and-bound
//! over binary variables. Problems can be dumped in CPLEX LP text format with
//! [`write_lp`] for cross-checking against external solvers.

mod bnb;
mod error;
mod lp_format;
mod lu;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
mod problem;
mod simplex;

pub use bnb::{solve_milp, solve_milp_with, Branching, MilpOptions, MilpSolution, MilpStatus};
pub use error::ProblemError;
pub use lp_format::write_lp;
pub use problem::{relax, LinearConstraint, LpProblem, MilpProblem, Relation};
pub use simplex::{
    solve_lp, solve_lp_with, Basis, LpSolution, LpStatus, PreparedLp, SimplexOptions, VarStatus,
};
