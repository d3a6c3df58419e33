//! P1 finite element generators for the two benchmark families: the
//! checkerboard conductivity problem and the translated-hole problem.

pub mod assembly;
pub mod mesh;
pub mod precond;
pub mod problems;

pub use assembly::{assemble_load, assemble_subdomain_stiffness, local_stiffness, Coefficient};
pub use mesh::{Mesh, Triangle};
pub use precond::{precondition_split, SplitPreconditioned};
pub use problems::{
    checkerboard_mesh, gen_checkerboard_problem, gen_hole_problem, hole_mesh, sigma_of_l, FemProblem, HoleGeometry,
};
