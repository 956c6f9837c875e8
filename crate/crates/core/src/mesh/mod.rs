//! Hierarchical quadrilateral meshes with hanging vertices.

mod generators;
mod quadmesh;
mod vtk;

pub use generators::{make_pipette_mesh, make_slit_mesh, unit_square, PipetteGeometry};
pub use quadmesh::{
    edge_key, BoundaryMarker, Cell, EdgeKey, Face, Point, QuadMesh, Rect, VertexOrigin,
};
pub use vtk::write_vtk;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("resolution {0} does not put the slit on a mesh line (needs an even count >= 2)")]
    InvalidResolution(usize),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("cell {0} has no parent patch")]
    NoPatch(usize),
}
