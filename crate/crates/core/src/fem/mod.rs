//! Plane-strain Neo-Hookean finite elements used to generate training data.

pub mod assembly;
pub mod constitutive;
pub mod element;
pub mod generate;
pub mod load;
pub mod material;
pub mod mesh;
pub mod solver;

pub use assembly::{assemble, external_force, internal_forces, internal_forces_and_tangent, Assembly};
pub use constitutive::{
    material_tangent, piola_stress, strain_energy, DeformationState, Tangent4, Tensor2,
};
pub use generate::{draw_load, generate_dataset, FemProblem, GenerationSpec, Generated};
pub use load::{LoadKind, LoadSpec};
pub use material::{lame_from_engineering, MaterialParams};
pub use mesh::{BeamGeometry, EdgeNode, Mesh2D};
pub use solver::{
    max_nodal_displacement, solve_static, solve_static_with, DenseSolver, DisplacementField,
    LinearSolver, Solution, SolveSettings, SolveStats,
};
