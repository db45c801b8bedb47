//! Exact finite-state computations on the configuration space: state
//! indexing, sparse generator assembly, linear solves, spectral gaps, and
//! canonical comparison paths.

pub mod gap;
pub mod generator;
pub mod index;
pub mod path;
pub mod solver;

pub use gap::{dense_spectrum, principal_gap, GapReport};
pub use generator::{assemble_birth_death, assemble_ehat, assemble_full, SparseGenerator};
pub use index::{BoxIndex, EhatIndex, SimplexIndex, DEFAULT_STATE_CAP};
pub use path::comparison_path;
pub use solver::{
    exact_capacity, pcg, solve_poisson, solve_poisson_dense, CapacitySolution, PoissonSolution,
    SolveReport,
};
