//! Mimetic staggered-grid discretizations of the scalar-wave, linear-wave,
//! compressible-wave and isentropic Euler equations.
//!
//! The difference operators satisfy their adjoint, chain-rule and advection
//! symmetry identities exactly on periodic uniform grids, so the discrete
//! energy of every model is conserved by the semi-discrete dynamics. The
//! [`audit`] module checks all of this numerically.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! pin `f64`, which is what the audits and the command-line driver use.
//!
//! ```
//! use mimetic_core::{integrators, CellField, FaceField, IntegratorConfig, Model, Physics, StaggeredGrid, StateLaw};
//!
//! let grid = StaggeredGrid::new_1d(32, 1.0)?;
//! let model = Model::new(grid.clone(), Physics::Euler { law: StateLaw::power(1.4, 1.0)? })?;
//! let rho = CellField::from_fn(&grid, |x| 1.0 + 0.2 * (2.0 * std::f64::consts::PI * x[0]).sin())?;
//! let state = model.flow_state(rho, FaceField::constant(&grid, 0.3))?;
//!
//! assert!(model.energy_rate_audit(&state)?.relative() < 1e-12);
//!
//! let next = integrators::step(&model, &state, &IntegratorConfig::rk4(1e-3)?)?;
//! let (e0, e1) = (model.energy(&state)?, model.energy(&next)?);
//! assert!((e1.mass - e0.mass).abs() < 1e-14);
//! # Ok::<(), mimetic_core::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod dense;
pub mod error;
pub mod grid;
pub mod integrators;
pub mod laws;
pub mod models;
pub mod operators;
pub mod sampling;
pub mod scalar;

pub use dense::{adjoint_residual, assemble_dense, LinearOperator, OperatorMatrix as GenericOperatorMatrix};
pub use error::{Error, Result};
pub use grid::{GridId, Location};
pub use integrators::{Dynamics, Scheme, StateVector};
pub use laws::EnergyForm;
pub use models::{ModelKind, RateAudit};
pub use operators::DensityKind;
pub use scalar::Scalar;

pub type StaggeredGrid = grid::StaggeredGrid<f64>;
pub type CellField = grid::CellField<f64>;
pub type FaceField = grid::FaceField<f64>;
pub type StateLaw = laws::StateLaw<f64>;
pub type PowerLaw = laws::PowerLaw<f64>;
pub type OperatorMatrix = dense::OperatorMatrix<f64>;
pub type Physics = models::Physics<f64>;
pub type Model = models::Model<f64>;
pub type ModelState = models::ModelState<f64>;
pub type EnergyBreakdown = models::EnergyBreakdown<f64>;
pub type IntegratorConfig = integrators::IntegratorConfig<f64>;

/// Single-precision aliases.
pub mod f32 {
    pub type StaggeredGrid = crate::grid::StaggeredGrid<f32>;
    pub type CellField = crate::grid::CellField<f32>;
    pub type FaceField = crate::grid::FaceField<f32>;
    pub type StateLaw = crate::laws::StateLaw<f32>;
    pub type Model = crate::models::Model<f32>;
    pub type ModelState = crate::models::ModelState<f32>;
}
