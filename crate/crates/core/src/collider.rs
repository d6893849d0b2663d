//! Mesh colliders on the MPM grid.
//!
//! Each collider face deposits its velocity and normal onto the 27 nodes
//! around its barycenter with B-spline weights. Grid nodes that received any
//! weight then have the inward normal component of their velocity, relative to
//! the collider, removed. Work is proportional to the number of faces.

use crate::error::{MeshError, SimError};
use crate::geometry::{face_frames_of, FaceFrame, MeshSequence, Vec3};
use crate::grid::{BackgroundGrid, GridSpec, SlotMap, Stencil};
use crate::Real;

/// Accumulated normals shorter than this leave the tangent plane undefined;
/// such nodes stick to the collider.
pub const NORMAL_CANCEL_EPS: Real = 1e-8;

/// Inward relative normal speeds above `-PROJECTION_TOL` are left alone, so a
/// second projection pass is a no-op.
pub const PROJECTION_TOL: Real = 1e-13;

#[derive(Debug, Clone, Default)]
pub struct ColliderFrame {
    pub faces: Vec<FaceFrame>,
    pub face_velocities: Vec<Vec3>,
    /// Coulomb coefficient for the optional tangential clamp.
    pub friction: Option<Real>,
}

impl ColliderFrame {
    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }
}

/// Per-node collider velocity, normal and weight.
#[derive(Debug, Clone)]
pub struct ColliderGridFields {
    slots: SlotMap,
    velocity: Vec<Vec3>,
    normal: Vec<Vec3>,
    weight: Vec<Real>,
    /// Node-visits made by the last rasterization (27 per face).
    pub visits: usize,
}

/// Finalized collider data at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColliderNode {
    pub velocity: Vec3,
    /// Unit normal, or zero where opposing normals cancelled.
    pub normal: Vec3,
    pub weight: Real,
}

impl ColliderGridFields {
    pub fn new(spec: &GridSpec) -> Self {
        Self {
            slots: SlotMap::new(spec.node_count()),
            velocity: Vec::new(),
            normal: Vec::new(),
            weight: Vec::new(),
            visits: 0,
        }
    }

    pub fn clear(&mut self) {
        self.slots.clear();
        self.velocity.clear();
        self.normal.clear();
        self.weight.clear();
        self.visits = 0;
    }

    /// Nodes with nonzero collider weight.
    pub fn touched_nodes(&self) -> &[usize] {
        self.slots.nodes()
    }

    pub fn touched_count(&self) -> usize {
        self.slots.len()
    }

    pub fn node(&self, node: usize) -> Option<ColliderNode> {
        self.slots.get(node).map(|s| ColliderNode {
            velocity: self.velocity[s],
            normal: self.normal[s],
            weight: self.weight[s],
        })
    }
}

/// Mesh-to-grid transfer of collider velocities and normals.
pub fn rasterize_collider(
    collider: &ColliderFrame,
    spec: &GridSpec,
    fields: &mut ColliderGridFields,
) -> Result<(), SimError> {
    fields.clear();
    for (face, vf) in collider.faces.iter().zip(&collider.face_velocities) {
        let stencil = Stencil::new(&face.barycenter, spec)?;
        stencil.for_each(spec, |node, w, _| {
            let (s, created) = fields.slots.insert(node);
            if created {
                fields.velocity.push(Vec3::zeros());
                fields.normal.push(Vec3::zeros());
                fields.weight.push(0.0);
            }
            fields.velocity[s] += vf * w;
            fields.normal[s] += face.normal * w;
            fields.weight[s] += w;
        });
        fields.visits += 27;
    }
    for s in 0..fields.weight.len() {
        let w = fields.weight[s];
        if w > 0.0 {
            fields.velocity[s] /= w;
            let n = fields.normal[s].norm();
            fields.normal[s] = if n >= NORMAL_CANCEL_EPS {
                fields.normal[s] / n
            } else {
                Vec3::zeros()
            };
        } else {
            fields.velocity[s] = Vec3::zeros();
            fields.normal[s] = Vec3::zeros();
        }
    }
    Ok(())
}

/// Projects one grid velocity against the collider. Returns `None` when the
/// node is separating and needs no change.
pub fn project_velocity(v: &Vec3, c: &ColliderNode, friction: Option<Real>) -> Option<Vec3> {
    if !(c.weight > 0.0) {
        return None;
    }
    if c.normal == Vec3::zeros() {
        return (*v != c.velocity).then_some(c.velocity);
    }
    let mut rel = v - c.velocity;
    let vn = rel.dot(&c.normal);
    if vn >= -PROJECTION_TOL {
        return None;
    }
    rel -= c.normal * vn;
    if let Some(mu) = friction {
        let vt = rel.norm();
        if vt > 0.0 {
            rel *= (1.0 - mu * vn.abs() / vt).max(0.0);
        }
    }
    Some(rel + c.velocity)
}

/// Relative-velocity projection at every node carrying both cloth mass and
/// collider weight. Returns the number of nodes changed.
pub fn project_grid_velocities(
    grid: &mut BackgroundGrid,
    fields: &ColliderGridFields,
    friction: Option<Real>,
) -> usize {
    let mut changed = 0;
    for (s, &node) in fields.touched_nodes().iter().enumerate() {
        let Some(gs) = grid.slot(node) else {
            continue;
        };
        let c = ColliderNode {
            velocity: fields.velocity[s],
            normal: fields.normal[s],
            weight: fields.weight[s],
        };
        if let Some(v) = project_velocity(&grid.velocity[gs], &c, friction) {
            grid.velocity[gs] = v;
            changed += 1;
        }
    }
    changed
}

/// Smallest `(v - v_c) · n_c` over nodes carrying cloth mass and a defined
/// collider normal; `None` when no such node exists.
pub fn min_relative_normal_velocity(grid: &BackgroundGrid, fields: &ColliderGridFields) -> Option<Real> {
    fields
        .touched_nodes()
        .iter()
        .enumerate()
        .filter(|&(s, _)| fields.weight[s] > 0.0)
        .filter_map(|(s, &node)| {
            let gs = grid.slot(node)?;
            Some((grid.velocity[gs] - fields.velocity[s]).dot(&fields.normal[s]))
        })
        .reduce(Real::min)
}

/// Per-face velocity of frame `t` by forward difference; the last frame reuses
/// the previous velocity and a single frame is static.
fn face_velocities(seq: &MeshSequence, t: usize) -> Vec<Vec3> {
    let n = seq.len();
    let faces = seq.faces();
    if n < 2 {
        return vec![Vec3::zeros(); faces.len()];
    }
    let t0 = t.min(n - 2);
    let (a, b) = (&seq.frames()[t0], &seq.frames()[t0 + 1]);
    faces
        .iter()
        .map(|f| {
            let da = (b[f[0]] - a[f[0]]) + (b[f[1]] - a[f[1]]) + (b[f[2]] - a[f[2]]);
            da / (3.0 * seq.frame_dt())
        })
        .collect()
}

pub fn collider_frames_from_sequence(seq: &MeshSequence) -> Vec<ColliderFrame> {
    (0..seq.len())
        .map(|t| ColliderFrame {
            faces: face_frames_of(&seq.frames()[t], seq.faces()),
            face_velocities: face_velocities(seq, t),
            friction: None,
        })
        .collect()
}

/// Collider motion sampled within frames by linear interpolation of the
/// vertex positions. A one-frame sequence is a static collider.
#[derive(Debug, Clone)]
pub struct ColliderTrack {
    seq: MeshSequence,
    velocities: Vec<Vec<Vec3>>,
    pub friction: Option<Real>,
    scratch: Vec<Vec3>,
}

impl ColliderTrack {
    pub fn new(seq: MeshSequence, friction: Option<Real>) -> Result<Self, MeshError> {
        if seq.is_empty() {
            return Err(MeshError::EmptySequence);
        }
        let velocities = (0..seq.len()).map(|t| face_velocities(&seq, t)).collect();
        Ok(Self {
            seq,
            velocities,
            friction,
            scratch: Vec::new(),
        })
    }

    pub fn sequence(&self) -> &MeshSequence {
        &self.seq
    }

    pub fn face_count(&self) -> usize {
        self.seq.faces().len()
    }

    pub fn is_static(&self) -> bool {
        self.seq.len() == 1
    }

    /// Frames needed to step `frames` frames forward.
    pub fn check_covers(&self, frames: usize) -> Result<(), SimError> {
        if self.is_static() || self.seq.len() > frames {
            Ok(())
        } else {
            Err(SimError::ColliderTooShort {
                available: self.seq.len(),
                required: frames + 1,
            })
        }
    }

    /// Collider state at `frame + fraction`, `fraction` in `[0, 1]`.
    pub fn sample(&mut self, frame: usize, fraction: Real, out: &mut ColliderFrame) {
        out.friction = self.friction;
        if self.is_static() {
            if out.faces.len() != self.face_count() {
                out.faces = face_frames_of(&self.seq.frames()[0], self.seq.faces());
                out.face_velocities = vec![Vec3::zeros(); self.face_count()];
            }
            return;
        }
        let last = self.seq.len() - 1;
        let f0 = frame.min(last);
        let f1 = (frame + 1).min(last);
        let (a, b) = (&self.seq.frames()[f0], &self.seq.frames()[f1]);
        self.scratch.clear();
        self.scratch
            .extend(a.iter().zip(b).map(|(p, q)| p + (q - p) * fraction));
        out.faces = face_frames_of(&self.scratch, self.seq.faces());
        out.face_velocities.clone_from(&self.velocities[f0]);
    }
}
