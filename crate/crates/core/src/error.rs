use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("cannot read {path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("texture image {path}: {msg}")]
    Image { path: PathBuf, msg: String },
    #[error("face {face} references vertex {vertex} but the mesh has {count} vertices")]
    BadIndex { face: usize, vertex: usize, count: usize },
    #[error("face {face} is degenerate (area {area:e} m^2)")]
    DegenerateFace { face: usize, area: f64 },
    #[error("non-manifold edge {edge} ({a}, {b}) has {count} incident faces")]
    NonManifoldEdge {
        edge: usize,
        a: usize,
        b: usize,
        count: usize,
    },
    #[error("inconsistent winding across edge ({a}, {b})")]
    InconsistentWinding { a: usize, b: usize },
    #[error("faces {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),
    #[error("antiparallel normals: transport undefined")]
    AntiparallelNormals,
    #[error("mesh is empty")]
    EmptyMesh,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("mesh has no {0} signal")]
    MissingSource(&'static str),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("bad file format: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
