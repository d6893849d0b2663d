//! Particle-grid stepping for codimensional cloth.
//!
//! Two particle populations share the grid:
//!
//! * one particle per mesh vertex, advected with the grid and used for output;
//! * one quadrature particle per triangle at its barycenter, carrying the
//!   normal column `d3` of the deformed material frame.
//!
//! The in-plane columns `d1 = b - a`, `d2 = c - a` are read from the vertex
//! positions, so the elastic force of those columns acts on the vertices
//! directly (as nodal forces splatted to the grid). The force of the normal
//! column acts through the grid via the element particle's affine momentum,
//! and `d3` is advanced with the element's velocity gradient. Transfers are
//! APIC with quadratic B-splines.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collider::{
    min_relative_normal_velocity, project_grid_velocities, rasterize_collider, ColliderFrame,
    ColliderGridFields, ColliderTrack,
};
use crate::constitutive::{first_piola, qr_decompose, ElasticParams};
use crate::error::SimError;
use crate::geometry::{bounds_of, MaterialFrame, Mat3, MeshSequence, TriMesh, Vec3, DEGENERATE_AREA_EPS};
use crate::grid::{BackgroundGrid, GridSpec, Stencil, BOUNDARY_NODES};
use crate::inverse::PhysParams;
use crate::restshape::{build_rest_state, RestShapeParam};
use crate::Real;

/// Axis-aligned box in scene units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec3,
    pub max: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Seconds per output frame.
    pub frame_dt: Real,
    pub substeps: usize,
    /// Cells along the longest domain axis.
    pub grid_resolution: usize,
    /// Simulation box; the grid is a cube anchored at `min` with side equal to
    /// the longest extent. Computed from the scene when absent.
    pub domain: Option<Bounds>,
    /// Fraction of the scene extent added on each side of an automatic domain.
    pub domain_padding: Real,
    /// y-up, 9.8 scene units per second squared by default.
    pub gravity: Vec3,
    /// Serial, fixed-order grid accumulation. Runs are then bit-reproducible.
    pub deterministic: bool,
    /// Fail, rather than clamp, when a particle leaves the domain.
    pub strict_domain: bool,
    /// Coulomb coefficient for collider contact; frictionless when absent.
    pub friction: Option<Real>,
    /// Vertices held at their initial positions.
    pub pinned: Vec<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            frame_dt: 0.04,
            substeps: 400,
            grid_resolution: 200,
            domain: None,
            domain_padding: 0.1,
            gravity: Vec3::new(0.0, -9.8, 0.0),
            deterministic: true,
            strict_domain: false,
            friction: None,
            pinned: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn substep_dt(&self) -> Real {
        self.frame_dt / self.substeps as Real
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.frame_dt > 0.0 && self.frame_dt.is_finite()) {
            return bad(format!("frame_dt must be positive, got {}", self.frame_dt));
        }
        if self.substeps < 1 {
            return bad("substeps must be at least 1".into());
        }
        if self.grid_resolution < 8 {
            return bad(format!(
                "grid_resolution must be at least 8, got {}",
                self.grid_resolution
            ));
        }
        if let Some(b) = &self.domain {
            if !(0..3).all(|a| b.max[a] > b.min[a]) {
                return bad("domain must have positive extent on every axis".into());
            }
        }
        if !(self.domain_padding >= 0.0) {
            return bad("domain_padding must be nonnegative".into());
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return bad("gravity must be finite".into());
        }
        if let Some(mu) = self.friction {
            if !(mu >= 0.0) {
                return bad(format!("friction must be nonnegative, got {mu}"));
            }
        }
        Ok(())
    }

    /// Grid over the configured domain, or over the padded bounds of the given
    /// points with a margin of [`BOUNDARY_NODES`] cells.
    pub fn grid_spec<'a>(&self, points: impl IntoIterator<Item = &'a [Vec3]>) -> GridSpec {
        let res = self.grid_resolution;
        if let Some(b) = &self.domain {
            let side = (b.max - b.min).max();
            return GridSpec::new(b.min, side, res);
        }
        let mut lo = Vec3::repeat(Real::INFINITY);
        let mut hi = Vec3::repeat(Real::NEG_INFINITY);
        for pts in points {
            if let Some((a, b)) = bounds_of(pts) {
                lo = lo.inf(&a);
                hi = hi.sup(&b);
            }
        }
        let extent = (hi - lo).max().max(1e-6);
        let padded = extent * (1.0 + 2.0 * self.domain_padding);
        let margin = BOUNDARY_NODES as Real;
        let side = padded * res as Real / (res as Real - 2.0 * margin);
        let center = (lo + hi) * 0.5;
        GridSpec::new(center - Vec3::repeat(side * 0.5), side, res)
    }
}

/// Position, velocity, affine velocity and mass of one particle population.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Particles {
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
    /// APIC affine matrix; approximates the velocity gradient.
    pub c: Vec<Mat3>,
    pub mass: Vec<Real>,
}

impl Particles {
    fn at_rest(x: Vec<Vec3>, mass: Vec<Real>) -> Self {
        let n = x.len();
        Self {
            x,
            v: vec![Vec3::zeros(); n],
            c: vec![Mat3::zeros(); n],
            mass,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn total_mass(&self) -> Real {
        self.mass.iter().sum()
    }

    pub fn momentum(&self) -> Vec3 {
        self.v.iter().zip(&self.mass).map(|(v, m)| v * *m).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub faces: Vec<[usize; 3]>,
    pub vertices: Particles,
    /// One quadrature particle per face, at the face barycenter.
    pub elements: Particles,
    /// Normal column of the deformed material frame, per face.
    pub normals: Vec<Vec3>,
    /// Inverse rest frame in face-local coordinates, per face.
    pub rest_inv: Vec<Mat3>,
    /// Rest area times unit thickness, per face.
    pub volume: Vec<Real>,
    pub pinned: Vec<bool>,
}

impl ParticleState {
    /// Cloth at rest in the pose of `cloth`. Face particles weigh
    /// `density · rest area`; vertex particles a third of the adjacent rest area
    /// times density.
    pub fn new(
        cloth: &TriMesh,
        rest: &[MaterialFrame],
        density: Real,
        pinned: &[usize],
    ) -> Result<Self, SimError> {
        if rest.len() != cloth.face_count() {
            return Err(SimError::Config(format!(
                "{} rest frames for {} faces",
                rest.len(),
                cloth.face_count()
            )));
        }
        if !(density > 0.0) {
            return Err(SimError::Config(format!("density must be positive, got {density}")));
        }
        let mut vertex_mass = vec![0.0; cloth.vertex_count()];
        let mut element_x = Vec::with_capacity(cloth.face_count());
        let mut normals = Vec::with_capacity(cloth.face_count());
        let mut volume = Vec::with_capacity(cloth.face_count());
        for (face, (f, frame)) in cloth.faces.iter().zip(rest).enumerate() {
            let [a, b, c] = f.map(|i| cloth.vertices[i]);
            let cross = (b - a).cross(&(c - a));
            if !(0.5 * cross.norm() >= DEGENERATE_AREA_EPS) {
                return Err(SimError::FaceCollapse { face });
            }
            let area = frame.area();
            for &i in f {
                vertex_mass[i] += density * area / 3.0;
            }
            element_x.push((a + b + c) / 3.0);
            normals.push(cross.normalize());
            volume.push(area);
        }
        if let Some(i) = vertex_mass.iter().position(|m| !(*m > 0.0)) {
            return Err(SimError::Config(format!("vertex {i} belongs to no face")));
        }
        let mut pin = vec![false; cloth.vertex_count()];
        for &i in pinned {
            *pin.get_mut(i)
                .ok_or_else(|| SimError::Config(format!("pinned vertex {i} out of range")))? = true;
        }
        let element_mass = volume.iter().map(|v| density * v).collect();
        Ok(Self {
            faces: cloth.faces.clone(),
            vertices: Particles::at_rest(cloth.vertices.clone(), vertex_mass),
            elements: Particles::at_rest(element_x, element_mass),
            normals,
            rest_inv: rest.iter().map(|r| r.local_inv).collect(),
            volume,
            pinned: pin,
        })
    }

    pub fn particle_count(&self) -> usize {
        self.vertices.len() + self.elements.len()
    }

    pub fn total_mass(&self) -> Real {
        self.vertices.total_mass() + self.elements.total_mass()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.vertices.momentum() + self.elements.momentum()
    }

    /// Deformed material directions `d = [b - a, c - a, d3]` of a face.
    pub fn deformed_frame(&self, face: usize) -> Mat3 {
        let [a, b, c] = self.faces[face].map(|i| self.vertices.x[i]);
        Mat3::from_columns(&[b - a, c - a, self.normals[face]])
    }

    /// `F = d · D⁻¹` of a face in its rest-local basis.
    pub fn deformation_gradient(&self, face: usize) -> Mat3 {
        self.deformed_frame(face) * self.rest_inv[face]
    }

    pub fn kinetic_energy(&self) -> Real {
        particle_kinetic_energy(&self.vertices) + particle_kinetic_energy(&self.elements)
    }

    /// Kinetic energy carried by the mesh vertices alone.
    pub fn vertex_kinetic_energy(&self) -> Real {
        particle_kinetic_energy(&self.vertices)
    }
}

fn particle_kinetic_energy(p: &Particles) -> Real {
    p.v.iter()
        .zip(&p.mass)
        .map(|(v, m)| 0.5 * m * v.norm_squared())
        .sum()
}

/// Per-face elastic response: `V · ∂psi/∂d`, whose columns are the energy
/// gradients with respect to `d1`, `d2` and `d3`.
pub fn element_stress(state: &ParticleState, params: &ElasticParams) -> Result<Vec<Mat3>, SimError> {
    (0..state.faces.len())
        .into_par_iter()
        .with_min_len(256)
        .map(|e| {
            let f = state.deformation_gradient(e);
            let qr = qr_decompose(&f).map_err(|source| SimError::Constitutive { element: e, source })?;
            let piola = first_piola(&qr, params);
            Ok(piola * state.rest_inv[e].transpose() * state.volume[e])
        })
        .collect()
}

/// One particle's contribution to the grid: `m`, `m v + dt f`, and the affine
/// matrix applied to `x_i - x_p`.
#[derive(Debug, Clone, Copy)]
struct Source {
    x: Vec3,
    mass: Real,
    momentum: Vec3,
    affine: Mat3,
}

/// Scatters mass and momentum, including the elastic impulse, to a cleared grid.
pub fn particle_to_grid(
    state: &ParticleState,
    grid: &mut BackgroundGrid,
    params: &ElasticParams,
    dt: Real,
    deterministic: bool,
) -> Result<(), SimError> {
    let spec = grid.spec;
    let apic = 4.0 / (spec.cell_size * spec.cell_size);
    let stress = element_stress(state, params)?;

    let mut force = vec![Vec3::zeros(); state.vertices.len()];
    for (f, g) in state.faces.iter().zip(&stress) {
        let g1: Vec3 = g.column(0).into();
        let g2: Vec3 = g.column(1).into();
        force[f[0]] += g1 + g2;
        force[f[1]] -= g1;
        force[f[2]] -= g2;
    }

    let vs = &state.vertices;
    let es = &state.elements;
    let mut sources = Vec::with_capacity(state.particle_count());
    sources.extend((0..vs.len()).map(|i| Source {
        x: vs.x[i],
        mass: vs.mass[i],
        momentum: vs.v[i] * vs.mass[i] + force[i] * dt,
        affine: vs.c[i] * vs.mass[i],
    }));
    sources.extend((0..es.len()).map(|e| {
        let g3: Vec3 = stress[e].column(2).into();
        Source {
            x: es.x[e],
            mass: es.mass[e],
            momentum: es.v[e] * es.mass[e],
            affine: es.c[e] * es.mass[e] - g3 * state.normals[e].transpose() * (dt * apic),
        }
    }));

    grid.clear();
    if deterministic {
        for s in &sources {
            let stencil = Stencil::new(&s.x, &spec)?;
            stencil.for_each(&spec, |node, w, dpos| {
                grid.deposit(node, w * s.mass, (s.momentum + s.affine * dpos) * w);
            });
        }
    } else {
        scatter_parallel(&sources, grid)?;
    }
    Ok(())
}

/// Parallel scatter into per-task buffers, summed in whatever order the
/// thread pool finishes. Results vary in the last bits between runs.
fn scatter_parallel(sources: &[Source], grid: &mut BackgroundGrid) -> Result<(), SimError> {
    let spec = grid.spec;
    let stencils = sources
        .iter()
        .map(|s| Stencil::new(&s.x, &spec))
        .collect::<Result<Vec<_>, _>>()?;
    for st in &stencils {
        st.for_each(&spec, |node, _, _| {
            grid.slot_mut(node);
        });
    }
    let n = grid.active_count();
    let grid_ref = &*grid;
    let (mass, momentum) = sources
        .par_iter()
        .zip(&stencils)
        .fold(
            || (vec![0.0; n], vec![Vec3::zeros(); n]),
            |(mut mass, mut momentum), (s, st)| {
                st.for_each(&spec, |node, w, dpos| {
                    let slot = grid_ref.slot(node).expect("slot allocated above");
                    mass[slot] += w * s.mass;
                    momentum[slot] += (s.momentum + s.affine * dpos) * w;
                });
                (mass, momentum)
            },
        )
        .reduce(
            || (vec![0.0; n], vec![Vec3::zeros(); n]),
            |(mut ma, mut pa), (mb, pb)| {
                for i in 0..n {
                    ma[i] += mb[i];
                    pa[i] += pb[i];
                }
                (ma, pa)
            },
        );
    grid.mass = mass;
    grid.momentum = momentum;
    Ok(())
}

/// Node velocities from momentum, plus gravity. Nodes within
/// [`BOUNDARY_NODES`] of a domain face lose the velocity component normal to it.
pub fn grid_update(grid: &mut BackgroundGrid, gravity: &Vec3, dt: Real) {
    let spec = grid.spec;
    let last = spec.resolution;
    for s in 0..grid.active_count() {
        let m = grid.mass[s];
        if !(m > 0.0) {
            grid.velocity[s] = Vec3::zeros();
            continue;
        }
        let mut v = grid.momentum[s] / m + gravity * dt;
        let coords = spec.coords(grid.active_nodes()[s]);
        for a in 0..3 {
            if coords[a] < BOUNDARY_NODES || coords[a] + BOUNDARY_NODES > last {
                v[a] = 0.0;
            }
        }
        grid.velocity[s] = v;
    }
}

/// Clamp/CFL bookkeeping of one gather pass.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GatherReport {
    pub clamped: usize,
    pub max_speed: Real,
}

fn gather(
    grid: &BackgroundGrid,
    p: &mut Particles,
    pinned: Option<&[bool]>,
    dt: Real,
    strict: bool,
) -> Result<GatherReport, SimError> {
    let spec = grid.spec;
    let apic = 4.0 / (spec.cell_size * spec.cell_size);
    let Particles { x, v, c, .. } = p;
    let results: Vec<Result<(bool, Real), SimError>> = x
        .par_iter_mut()
        .zip(v.par_iter_mut())
        .zip(c.par_iter_mut())
        .enumerate()
        .with_min_len(256)
        .map(|(i, ((x, v), c))| {
            if pinned.is_some_and(|p| p[i]) {
                *v = Vec3::zeros();
                *c = Mat3::zeros();
                return Ok((false, 0.0));
            }
            let stencil = Stencil::new(x, &spec)?;
            let mut vel = Vec3::zeros();
            let mut b = Mat3::zeros();
            stencil.for_each(&spec, |node, w, dpos| {
                let vi = grid.velocity(node);
                vel += vi * w;
                b += (vi * w) * dpos.transpose();
            });
            if !vel.iter().all(|c| c.is_finite()) {
                return Err(SimError::NonFinite { particle: i });
            }
            let speed = vel.norm();
            if speed * dt >= spec.cell_size {
                return Err(SimError::Cfl {
                    particle: i,
                    speed,
                    cells: speed * dt / spec.cell_size,
                });
            }
            *v = vel;
            *c = b * apic;
            let moved = *x + vel * dt;
            if spec.contains(&moved) {
                *x = moved;
                Ok((false, speed))
            } else if strict {
                Err(SimError::OutOfDomain {
                    position: [moved.x, moved.y, moved.z],
                })
            } else {
                *x = spec.clamp(&moved);
                Ok((true, speed))
            }
        })
        .collect();
    let mut report = GatherReport::default();
    for r in results {
        let (clamped, speed) = r?;
        report.clamped += clamped as usize;
        report.max_speed = report.max_speed.max(speed);
    }
    Ok(report)
}

/// Interpolates velocity and affine state back to every particle and advects it.
pub fn grid_to_particle(
    grid: &BackgroundGrid,
    state: &mut ParticleState,
    dt: Real,
    strict: bool,
) -> Result<GatherReport, SimError> {
    let a = gather(grid, &mut state.vertices, Some(&state.pinned), dt, strict)?;
    let b = gather(grid, &mut state.elements, None, dt, strict)?;
    Ok(GatherReport {
        clamped: a.clamped + b.clamped,
        max_speed: a.max_speed.max(b.max_speed),
    })
}

/// Advances `d3 ← (I + dt ∇v) d3` and re-centres element particles on their
/// faces. The in-plane columns follow the vertices implicitly.
pub fn update_material_frames(state: &mut ParticleState, dt: Real) -> Result<(), SimError> {
    let verts = &state.vertices.x;
    let faces = &state.faces;
    let elements = &mut state.elements;
    state
        .normals
        .par_iter_mut()
        .zip(elements.x.par_iter_mut())
        .zip(elements.c.par_iter())
        .enumerate()
        .with_min_len(256)
        .try_for_each(|(e, ((d3, x), c))| {
            let [a, b, cc] = faces[e].map(|i| verts[i]);
            if !(0.5 * (b - a).cross(&(cc - a)).norm() >= DEGENERATE_AREA_EPS) {
                return Err(SimError::FaceCollapse { face: e });
            }
            *d3 += c * *d3 * dt;
            *x = (a + b + cc) / 3.0;
            Ok(())
        })
}

/// Counters accumulated over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimStats {
    pub substeps: usize,
    pub clamped: usize,
    pub max_speed: Real,
    /// Largest number of grid nodes a single collider rasterization touched.
    pub max_collider_nodes: usize,
    /// Largest node-visit count of a single collider rasterization.
    pub max_collider_visits: usize,
    /// Smallest post-projection relative normal velocity seen at a colliding node.
    pub min_relative_normal_velocity: Real,
    /// Seconds spent in collider rasterization and projection.
    pub collider_seconds: Real,
}

impl Default for SimStats {
    fn default() -> Self {
        Self {
            substeps: 0,
            clamped: 0,
            max_speed: 0.0,
            max_collider_nodes: 0,
            max_collider_visits: 0,
            min_relative_normal_velocity: Real::INFINITY,
            collider_seconds: 0.0,
        }
    }
}

/// A running cloth simulation.
pub struct Simulation {
    config: SimConfig,
    elastic: ElasticParams,
    pub state: ParticleState,
    pub grid: BackgroundGrid,
    pub collider_fields: ColliderGridFields,
    collider: Option<ColliderTrack>,
    collider_frame: ColliderFrame,
    frame: usize,
    pub stats: SimStats,
}

impl Simulation {
    /// Sets up a run from explicit rest frames.
    pub fn new(
        cloth0: &TriMesh,
        rest: &[MaterialFrame],
        colliders: Option<&MeshSequence>,
        params: &PhysParams,
        config: &SimConfig,
    ) -> Result<Self, SimError> {
        config.validate()?;
        params
            .validate()
            .map_err(|e| SimError::Config(e.to_string()))?;
        let state = ParticleState::new(cloth0, rest, params.density, &config.pinned)?;

        let mut point_sets: Vec<&[Vec3]> = vec![&cloth0.vertices];
        if let Some(seq) = colliders {
            point_sets.extend(seq.frames().iter().map(Vec::as_slice));
        }
        let spec = config.grid_spec(point_sets);
        if let Some(i) = state
            .vertices
            .x
            .iter()
            .position(|x| !spec.contains(x))
        {
            let p = state.vertices.x[i];
            return Err(SimError::OutOfDomain {
                position: [p.x, p.y, p.z],
            });
        }
        let collider = colliders
            .map(|seq| ColliderTrack::new(seq.clone(), config.friction))
            .transpose()?;
        Ok(Self {
            config: config.clone(),
            elastic: params.elastic,
            state,
            grid: BackgroundGrid::new(spec),
            collider_fields: ColliderGridFields::new(&spec),
            collider,
            collider_frame: ColliderFrame::default(),
            frame: 0,
            stats: SimStats::default(),
        })
    }

    /// Sets up a run whose rest frames come from `params.alpha` and the
    /// configured gravity direction.
    pub fn with_rest_alpha(
        cloth0: &TriMesh,
        colliders: Option<&MeshSequence>,
        params: &PhysParams,
        config: &SimConfig,
    ) -> Result<Self, SimError> {
        let rest = rest_frames(cloth0, params.alpha, &config.gravity)?;
        Self::new(cloth0, &rest, colliders, params, config)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid.spec
    }

    /// Frames completed so far.
    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn vertex_positions(&self) -> &[Vec3] {
        &self.state.vertices.x
    }

    pub fn check_collider_covers(&self, frames: usize) -> Result<(), SimError> {
        match &self.collider {
            Some(track) => track.check_covers(frames),
            None => Ok(()),
        }
    }

    /// One substep at `fraction` of the way through the current frame (the
    /// collider is sampled at the end of the substep).
    pub fn substep(&mut self, fraction: Real) -> Result<(), SimError> {
        let dt = self.config.substep_dt();
        particle_to_grid(
            &self.state,
            &mut self.grid,
            &self.elastic,
            dt,
            self.config.deterministic,
        )?;
        grid_update(&mut self.grid, &self.config.gravity, dt);
        if let Some(track) = &mut self.collider {
            let t0 = Instant::now();
            track.sample(self.frame, fraction, &mut self.collider_frame);
            rasterize_collider(&self.collider_frame, &self.grid.spec, &mut self.collider_fields)?;
            project_grid_velocities(&mut self.grid, &self.collider_fields, self.collider_frame.friction);
            let s = &mut self.stats;
            s.max_collider_nodes = s.max_collider_nodes.max(self.collider_fields.touched_count());
            s.max_collider_visits = s.max_collider_visits.max(self.collider_fields.visits);
            if let Some(m) = min_relative_normal_velocity(&self.grid, &self.collider_fields) {
                s.min_relative_normal_velocity = s.min_relative_normal_velocity.min(m);
            }
            s.collider_seconds += t0.elapsed().as_secs_f64();
        }
        let report = grid_to_particle(&self.grid, &mut self.state, dt, self.config.strict_domain)?;
        update_material_frames(&mut self.state, dt)?;
        self.stats.substeps += 1;
        self.stats.clamped += report.clamped;
        self.stats.max_speed = self.stats.max_speed.max(report.max_speed);
        Ok(())
    }

    /// Advances one output frame.
    pub fn step_frame(&mut self) -> Result<(), SimError> {
        self.check_collider_covers(self.frame + 1)?;
        let n = self.config.substeps;
        let clamped_before = self.stats.clamped;
        for s in 0..n {
            self.substep((s + 1) as Real / n as Real)?;
        }
        if self.stats.clamped > clamped_before {
            log::warn!(
                "frame {}: {} particle positions clamped to the domain",
                self.frame + 1,
                self.stats.clamped - clamped_before
            );
        }
        self.frame += 1;
        Ok(())
    }
}

/// Rest frames for `alpha` with gravity along `gravity`.
pub fn rest_frames(cloth: &TriMesh, alpha: Real, gravity: &Vec3) -> Result<Vec<MaterialFrame>, SimError> {
    let param =
        RestShapeParam::from_gravity(alpha, gravity).map_err(|e| SimError::Config(e.to_string()))?;
    build_rest_state(cloth, &param).map_err(|e| SimError::Config(e.to_string()))
}

/// Rolls the cloth forward `frames` frames. The result holds `frames + 1`
/// meshes, the first being `cloth0`.
pub fn simulate_sequence(
    cloth0: &TriMesh,
    rest: &[MaterialFrame],
    colliders: Option<&MeshSequence>,
    params: &PhysParams,
    config: &SimConfig,
    frames: usize,
) -> Result<MeshSequence, SimError> {
    let mut sim = Simulation::new(cloth0, rest, colliders, params, config)?;
    sim.check_collider_covers(frames)?;
    let mut out = MeshSequence::new(
        cloth0.faces.clone(),
        cloth0.vertex_count(),
        vec![cloth0.vertices.clone()],
        config.frame_dt,
    )?;
    for _ in 0..frames {
        sim.step_frame()?;
        out.push_frame(sim.vertex_positions().to_vec())?;
    }
    Ok(out)
}
