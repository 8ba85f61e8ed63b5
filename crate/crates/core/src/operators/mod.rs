//! Spatial operators and the algebraic solvers built on them.

pub mod cg;
pub mod newton;
pub mod spectral;
pub mod stencil;

pub use cg::{cg_solve, cg_solve_spectral, pcg, LinOpSpec, LinearOperator, Preconditioner, SolveReport, StopRule};
pub use newton::{newton_safeguarded, NewtonProblem, NewtonReport, NewtonSettings};
pub use spectral::NeumannSpectrum;
pub use stencil::{chemotaxis_div, chemotaxis_div_adjoint, gradient_inner, h1_norm, laplacian_neumann};
