//! Material point method simulation of codimensional cloth.
//!
//! Cloth is a triangle mesh whose vertices are advected as particles, with one
//! extra quadrature particle per triangle carrying the anisotropic material
//! frame. Colliders are triangle meshes rasterized onto the background grid
//! every substep. On top of the simulator sit a finite-difference parameter
//! fitter and surface-discrepancy metrics.

pub mod collider;
pub mod constitutive;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod inverse;
pub mod metrics;
pub mod mpm;
pub mod restshape;

pub type Real = f64;

pub use constitutive::ElasticParams;
pub use error::{ConstitutiveError, FitError, MeshError, MetricsError, RestShapeError, SimError};
pub use geometry::{Mat3, MeshSequence, TriMesh, Vec3};
pub use inverse::{OptimConfig, PhysParams};
pub use mpm::{SimConfig, Simulation};
