//! Numerical solver and estimate audits for the coupled static system
//!
//! ```text
//! λu − div(A(x)Du − f(θ)) = g,
//! μθ − div a(x, Dθ)       = (A(x)Du − f(θ))·Du,
//! ```
//!
//! with homogeneous Dirichlet conditions on the unit square.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the `*64` aliases below are the usual entry points.
//!
//! ```
//! use thermovisc::{build_mesh, fixed_point_solve, ProblemData64, ScalarField64};
//!
//! let mesh = build_mesh(16)?;
//! let g = ScalarField64::from_fn_dirichlet(mesh, |p| (p.x * p.y).sin());
//! let problem = ProblemData64::simple(g);
//! let sol = fixed_point_solve(&problem, 0.5, 1e-8, 200)?;
//! assert!(thermovisc::l1_norm(&sol.theta).is_finite());
//! # Ok::<(), thermovisc::Error>(())
//! ```

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod coupling;
pub mod error;
pub mod fem;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod theta_solver;
pub mod u_solver;

pub use audit::{
    bg_estimate_audit, bg_estimate_refinement, energy_inequality_audit, lemma2_lq_audit,
    lemma2_refinement, limit_inequality_audit, log_h1_audit, log_h1_refinement,
    uniqueness_chain_audit, w1p_bound_audit, AuditReport, UniquenessChain,
};
pub use coupling::{
    ball_radius, coupling_rhs, epsilon_scheme, fixed_point_solve, fixed_point_solve_from,
    gamma_map, positivity_check, small_data_certificate, small_data_sweep, uniqueness_probe,
    BallCertificate, CoupledSolution, FixedPointOptions, FixedPointTrace,
};
pub use error::{Assumption, Error, Result};
pub use grid::{
    build_mesh, dirichlet_energy, gradient, h1_seminorm, integrate, l1_norm, l2_norm,
    level_set_measure, lq_norm, read_field_csv, truncate_field, w1p_seminorm, write_field_csv,
    CellVectorField, Mesh, ScalarField,
};
pub use model::{
    extend_below, f_star, truncated_nonlinearity, validate_problem, DiffusionMatrix, MonotoneFlux,
    Nonlinearity, ProblemData,
};
pub use scalar::{truncate, Mat2, Real, Vec2};
pub use theta_solver::{
    diagnostics, identity_with_admissible_test, renorm_identity_residual, solve_theta,
    solve_theta_with, truncated_data_stability, RenormDiagnostics, ThetaOptions,
};
pub use u_solver::{solve_u, u_energy_audit};

pub type ScalarField64 = ScalarField<f64>;
pub type ScalarField32 = ScalarField<f32>;
pub type CellVectorField64 = CellVectorField<f64>;
pub type ProblemData64 = ProblemData<f64>;
pub type ProblemData32 = ProblemData<f32>;
pub type CoupledSolution64 = CoupledSolution<f64>;
