use std::path::PathBuf;

use thiserror::Error;

use crate::Real;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("face {face} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("face {face} repeats a vertex index")]
    RepeatedVertex { face: usize },
    #[error("face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: Real },
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFiniteVertex { vertex: usize },
    #[error("face {face} has a singular material frame")]
    SingularFrame { face: usize },
    #[error("expected {expected} vertices, found {found}")]
    VertexCountMismatch { expected: usize, found: usize },
    #[error("frame {frame} has {found} vertices, expected {expected}")]
    FrameVertexCount {
        frame: usize,
        expected: usize,
        found: usize,
    },
    #[error("frame {frame} does not share the sequence topology")]
    TopologyMismatch { frame: usize },
    #[error("frame interval must be positive, got {0}")]
    InvalidFrameDt(Real),
    #[error("mesh sequence is empty")]
    EmptySequence,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstitutiveError {
    #[error("deformation gradient is singular or inverted: R[{index}][{index}] = {value:e}")]
    Inverted { index: usize, value: Real },
    #[error("deformation gradient has non-finite entries")]
    NonFinite,
    #[error("invalid elastic parameter {name} = {value}")]
    InvalidParam { name: &'static str, value: Real },
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("element {element}: {source}")]
    Constitutive {
        element: usize,
        #[source]
        source: ConstitutiveError,
    },
    #[error("position {position:?} lies outside the simulation domain")]
    OutOfDomain { position: [Real; 3] },
    #[error(
        "CFL violation: particle {particle} speed {speed:.4e} moves {cells:.3} cells in one substep"
    )]
    Cfl {
        particle: usize,
        speed: Real,
        cells: Real,
    },
    #[error("face {face} collapsed to zero area")]
    FaceCollapse { face: usize },
    #[error("collider sequence has {available} frames but {required} are required")]
    ColliderTooShort { available: usize, required: usize },
    #[error("non-finite state at particle {particle}")]
    NonFinite { particle: usize },
}

#[derive(Debug, Error)]
pub enum RestShapeError {
    #[error("alpha must lie in [0, 1], got {0}")]
    AlphaOutOfRange(Real),
    #[error("gravity direction must be a unit vector")]
    GravityNotUnit,
    #[error("face {face} collapses under rest compensation with alpha = {alpha}")]
    DegenerateFace { face: usize, alpha: Real },
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid optimizer config: {0}")]
    Config(String),
    #[error("sequence shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite gradient {0:?}")]
    NonFiniteGradient([Real; 3]),
    #[error("rollout failed at iteration {iteration} with (E, rho, alpha) = ({e}, {rho}, {alpha}): {message}")]
    Rollout {
        iteration: usize,
        e: Real,
        rho: Real,
        alpha: Real,
        message: String,
    },
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("point set is empty")]
    EmptySet,
    #[error("point set has a non-finite coordinate")]
    NonFinite,
    #[error("mesh has zero total area")]
    ZeroArea,
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(Real),
    #[error("sample count must be at least 1")]
    NoSamples,
}
