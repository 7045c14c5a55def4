//! Regularized p-energy minimization on the neck, discretized with P1
//! simplices on a tensor grid in chart coordinates.

mod config;
mod energy;
mod field;
mod linear;
mod mesh;
mod newton;

pub use config::{Dirichlet, SolverConfig, TraceFn};
pub use energy::{assemble_energy, energy_value, EnergyEval};
pub use field::{
    gradient_field, neumann_residual, oscillation, CellGradients, DiscreteField, NeumannResidual, SolveReport,
    StageRecord,
};
pub use linear::SparseLdl;
pub use mesh::{graded_axis, Mesh};
pub use newton::solve;
