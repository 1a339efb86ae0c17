//! Sparse convex quadratic programming.

mod admm;
mod band;
mod dump;
mod ipm;
mod oracle;
mod problem;
mod sparse;
mod steady_state;

pub use admm::{solve_qp, QpSettings, QpSolution, QpSolver, QpStatus, WarmStart};
pub use band::{plan, BandBorder, BandFactor};
pub use dump::QpDump;
pub use oracle::{solve_by_enumeration, ORACLE_MAX_ROWS};
pub use problem::{KktReport, QpBuilder, QuadraticProgram, RowKind};
pub use sparse::CsrMatrix;
pub use steady_state::{fixed_point_residual, solve_steady_state, SteadyObjective, SteadyState};
