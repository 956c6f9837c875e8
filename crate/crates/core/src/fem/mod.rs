//! Q1 finite elements on quadrilateral meshes.

mod assembly;
mod dofmap;
mod element;
mod field;
mod patch;
mod quadrature;

pub use assembly::{
    add_local_vector, errors, load_vector, mass_matrix, stiffness_matrix, Triplets,
};
pub use dofmap::{DofMap, VertexDof};
pub use element::{
    edge_normal, edge_ref_point, shape, shape_grad_ref, value_grad, CellMap, MappedPoint,
};
pub use field::FieldFn;
pub use patch::{to_physical, PatchInterpolator};
pub use quadrature::{boundary_quadrature, gauss_legendre, LineRule, QuadratureRule};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("boundary quadrature did not settle after {subintervals} subintervals")]
    QuadratureTooCoarse { subintervals: usize },
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
}
