//! Propagating values and propagating modes of open periodic waveguides.
//!
//! A periodic strip (one Wigner–Seitz cell of width `period`) is truncated in
//! the transverse direction by perfectly matched layers, discretised with P1
//! finite elements on a structured triangulation, and turned into a quadratic
//! eigenvalue problem
//!
//! ```text
//! (A + α B + α² C) φ = 0
//! ```
//!
//! in the Bloch quasimomentum `α`. The quadratic pencil is linearised to a
//! `2n × 2n` generalized problem and solved near real shifts with a
//! shift-invert Krylov–Schur iteration. Propagating values are the computed
//! eigenvalues with a negligible imaginary part; the corresponding field
//! `u = φ e^{iαx₁}` is the propagating mode.
//!
//! Module map:
//!
//! - [`mesh`]: structured triangulation, periodic/Dirichlet DOF map
//! - [`pml`]: complex stretching profile and PML decay diagnostics
//! - [`assembly`]: sparse matrices of the quadratic pencil
//! - [`eigensolver`]: linearization, shift-invert solve, filtering, mode fields
//! - [`oracle`]: closed-form slab-waveguide reference modes
//! - [`experiments`]: refinement ladders, convergence orders, PML sweeps
//! - [`export`]: CSV and Matrix Market writers

// `!(x > 0.0)` also rejects NaN; element kernels index small fixed arrays
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod eigensolver;
pub mod error;
pub mod experiments;
pub mod export;
pub mod mesh;
pub mod oracle;
pub mod pml;
pub mod quadrature;
pub mod sparse;

mod dense;

pub use num_complex::Complex64;

/// Crate version, recorded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use assembly::{assemble_forms, assemble_h1_gram, garding_probe, AssembledSystem, IndexRegion, RefractiveIndexMap};
pub use eigensolver::{
    check_pair_symmetry, dense_eigenvalues, filter_propagating, linearize, mode_field, solve_shift_invert, EigenPair,
    LinearizedPencil, ModeField, PropagatingValue, SolverConfig,
};
pub use error::{Error, Result};
pub use experiments::{
    convergence_orders, export_profile, pml_robustness_sweep, run_experiment, solve_level, ConvergenceReport,
    ExperimentConfig, ExperimentRun, LevelSolution, Reference,
};
pub use mesh::{build_dof_map, build_structured_mesh, mesh_statistics, DofMap, DomainSpec, Mesh, Region};
pub use oracle::{dispersion_solve, l2_mode_error, AnalyticMode, Parity, SlabModeSpec};
pub use pml::{PmlProfile, Side};
pub use quadrature::QuadratureRule;
pub use sparse::SparseMatrix;

/// Shorthand for `Complex64::new(re, im)`.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
