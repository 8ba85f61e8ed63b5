//! Finite-difference solver, exact discrete tangent/adjoint and projected
//! gradient optimal control for a viscous Cahn-Hilliard-Keller-Segel tumor
//! growth model on a rectangle with zero-flux boundaries.
//!
//! ```
//! use chks::state::{solve_state, InitialData, SolverOptions};
//! use chks::{Field, FieldSeq, GammaSource, Grid2D, Model, ModelParams};
//!
//! # fn main() -> chks::Result<()> {
//! let grid = Grid2D::unit_square(32)?;
//! let params = ModelParams { nt: 50, ..ModelParams::default() };
//! let model = Model::new(params, GammaSource::tanh_default(0.5)?)?;
//! let init = InitialData::new(
//!     Field::from_fn(&grid, |x, y| 0.4 * (std::f64::consts::PI * x).cos() * y),
//!     Field::constant(&grid, 0.5),
//!     1e-3,
//! )?;
//! let traj = solve_state(&init, &FieldSeq::zeros(&grid, 50), &model, SolverOptions::default())?;
//! assert!(traj.separation_margin() > 0.0);
//! # Ok(())
//! # }
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod control;
pub mod error;
pub mod field_seq;
pub mod gamma;
pub mod grid;
pub mod io;
pub mod operators;
pub mod params;
pub mod potential;
pub mod sensitivity;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
pub use field_seq::{Control, FieldSeq};
pub use gamma::GammaSource;
pub use grid::{Field, Grid2D};
pub use params::{Model, ModelParams};
pub use potential::LogPotential;
