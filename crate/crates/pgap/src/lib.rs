//! Gradient blow-up experiments for the p-Laplacian in the thin gap between
//! two nearly touching insulators.
//!
//! The crate solves the regularized p-energy minimization on the neck of the
//! gap, certifies explicit barriers, checks the flattening change of variables
//! and measures how the gradient blows up as the gap closes.
//!
//! Geometry, transforms, barriers and the solver are generic over the scalar
//! type (`f32` or `f64`). Experiments, reports and the command-line layer work
//! in `f64`; the aliases below name the `f64` instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barriers;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod scalar;
pub mod solver;
pub mod transforms;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Geometry = geometry::GapGeometry<f64>;
pub type Profile = geometry::Profile<f64>;
pub type Region = geometry::Region<f64>;
pub type NeckChart = transforms::NeckChart<f64>;
pub type PhiChart = transforms::PhiChart<f64>;
pub type SolverConfig = solver::SolverConfig<f64>;
pub type DiscreteField = solver::DiscreteField<f64>;
pub type BarrierSpec = barriers::BarrierSpec<f64>;
