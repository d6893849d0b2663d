//! Background grid and quadratic B-spline interpolation.
//!
//! Storage is sparse: a dense index array maps node ids to slots, and only the
//! slots touched this substep are cleared. A 200³ grid thus costs one `u32` per
//! node plus the active nodes.

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::geometry::Vec3;
use crate::Real;

/// Nodes this close to the domain faces get their normal velocity zeroed.
pub const BOUNDARY_NODES: usize = 3;

const EMPTY: u32 = u32::MAX;

/// Axis-aligned cube discretized into `resolution` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vec3,
    pub cell_size: Real,
    pub resolution: usize,
}

impl GridSpec {
    /// Cube with its corner at `lo` and side `side`.
    pub fn new(origin: Vec3, side: Real, resolution: usize) -> Self {
        Self {
            origin,
            cell_size: side / resolution as Real,
            resolution,
        }
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.resolution + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis().pow(3)
    }

    pub fn side(&self) -> Real {
        self.cell_size * self.resolution as Real
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.nodes_per_axis();
        (i * n + j) * n + k
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let n = self.nodes_per_axis();
        [index / (n * n), (index / n) % n, index % n]
    }

    pub fn node_position(&self, index: usize) -> Vec3 {
        let [i, j, k] = self.coords(index);
        self.origin + Vec3::new(i as Real, j as Real, k as Real) * self.cell_size
    }

    /// Range of positions whose stencil stays on the grid: one cell in from each face.
    pub fn interior(&self) -> (Vec3, Vec3) {
        let h = self.cell_size;
        let n = self.resolution as Real;
        (
            self.origin + Vec3::repeat(h),
            self.origin + Vec3::repeat((n - 1.0) * h),
        )
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let (lo, hi) = self.interior();
        (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a])
    }

    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        let (lo, hi) = self.interior();
        p.sup(&lo).inf(&hi)
    }
}

/// Quadratic B-spline stencil of one point: the lowest of the 3×3×3 nodes and
/// the per-axis weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub base: [usize; 3],
    pub weights: [[Real; 3]; 3],
    /// Offset of the point from the base node in cell units, per axis.
    pub offset: [Real; 3],
}

impl Stencil {
    pub fn new(p: &Vec3, grid: &GridSpec) -> Result<Self, SimError> {
        let mut base = [0usize; 3];
        let mut weights = [[0.0; 3]; 3];
        let mut offset = [0.0; 3];
        let last = grid.resolution as isize;
        for a in 0..3 {
            let x = (p[a] - grid.origin[a]) / grid.cell_size;
            let b = (x - 0.5).floor();
            if !(b >= 0.0 && (b as isize) + 2 <= last) {
                return Err(SimError::OutOfDomain {
                    position: [p.x, p.y, p.z],
                });
            }
            let fx = x - b;
            weights[a] = [
                0.5 * (1.5 - fx) * (1.5 - fx),
                0.75 - (fx - 1.0) * (fx - 1.0),
                0.5 * (fx - 0.5) * (fx - 0.5),
            ];
            base[a] = b as usize;
            offset[a] = fx;
        }
        Ok(Self {
            base,
            weights,
            offset,
        })
    }

    /// Visits the 27 nodes as `(node index, weight, node position - point)`.
    #[inline]
    pub fn for_each(&self, grid: &GridSpec, mut f: impl FnMut(usize, Real, Vec3)) {
        let h = grid.cell_size;
        for i in 0..3 {
            let wi = self.weights[0][i];
            let dx = (i as Real - self.offset[0]) * h;
            for j in 0..3 {
                let wij = wi * self.weights[1][j];
                let dy = (j as Real - self.offset[1]) * h;
                let row = grid.index(self.base[0] + i, self.base[1] + j, self.base[2]);
                for k in 0..3 {
                    let dz = (k as Real - self.offset[2]) * h;
                    f(row + k, wij * self.weights[2][k], Vec3::new(dx, dy, dz));
                }
            }
        }
    }
}

/// The 27 `(node index, weight)` pairs of the quadratic B-spline kernel at `p`.
pub fn bspline_weights(p: &Vec3, grid: &GridSpec) -> Result<Vec<(usize, Real)>, SimError> {
    let stencil = Stencil::new(p, grid)?;
    let mut out = Vec::with_capacity(27);
    stencil.for_each(grid, |idx, w, _| out.push((idx, w)));
    Ok(out)
}

/// Dense node-id → slot map with a list of the touched nodes.
#[derive(Debug, Clone)]
pub(crate) struct SlotMap {
    slot_of: Vec<u32>,
    nodes: Vec<usize>,
}

impl SlotMap {
    pub fn new(node_count: usize) -> Self {
        Self {
            slot_of: vec![EMPTY; node_count],
            nodes: Vec::new(),
        }
    }

    pub fn clear(&mut self) {
        for &n in &self.nodes {
            self.slot_of[n] = EMPTY;
        }
        self.nodes.clear();
    }

    #[inline]
    pub fn get(&self, node: usize) -> Option<usize> {
        let s = self.slot_of[node];
        (s != EMPTY).then_some(s as usize)
    }

    /// Returns the slot and whether it was created.
    #[inline]
    pub fn insert(&mut self, node: usize) -> (usize, bool) {
        let s = self.slot_of[node];
        if s != EMPTY {
            (s as usize, false)
        } else {
            let s = self.nodes.len();
            self.slot_of[node] = s as u32;
            self.nodes.push(node);
            (s, true)
        }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }
}

/// Cloth mass and momentum on the grid. `velocity` is valid after
/// [`crate::mpm::grid_update`].
#[derive(Debug, Clone)]
pub struct BackgroundGrid {
    pub spec: GridSpec,
    slots: SlotMap,
    pub(crate) mass: Vec<Real>,
    pub(crate) momentum: Vec<Vec3>,
    pub(crate) velocity: Vec<Vec3>,
}

impl BackgroundGrid {
    pub fn new(spec: GridSpec) -> Self {
        Self {
            spec,
            slots: SlotMap::new(spec.node_count()),
            mass: Vec::new(),
            momentum: Vec::new(),
            velocity: Vec::new(),
        }
    }

    pub fn clear(&mut self) {
        self.slots.clear();
        self.mass.clear();
        self.momentum.clear();
        self.velocity.clear();
    }

    #[inline]
    pub(crate) fn slot_mut(&mut self, node: usize) -> usize {
        let (s, created) = self.slots.insert(node);
        if created {
            self.mass.push(0.0);
            self.momentum.push(Vec3::zeros());
            self.velocity.push(Vec3::zeros());
        }
        s
    }

    #[inline]
    pub fn slot(&self, node: usize) -> Option<usize> {
        self.slots.get(node)
    }

    /// Node ids with storage this substep, in slot order.
    pub fn active_nodes(&self) -> &[usize] {
        self.slots.nodes()
    }

    pub fn active_count(&self) -> usize {
        self.slots.len()
    }

    pub fn mass(&self, node: usize) -> Real {
        self.slot(node).map_or(0.0, |s| self.mass[s])
    }

    pub fn momentum(&self, node: usize) -> Vec3 {
        self.slot(node).map_or(Vec3::zeros(), |s| self.momentum[s])
    }

    pub fn velocity(&self, node: usize) -> Vec3 {
        self.slot(node).map_or(Vec3::zeros(), |s| self.velocity[s])
    }

    /// Overwrites a node's velocity, creating the node if needed.
    pub fn set_velocity(&mut self, node: usize, v: Vec3) {
        let s = self.slot_mut(node);
        self.velocity[s] = v;
    }

    /// Adds mass and momentum at a node.
    pub fn deposit(&mut self, node: usize, mass: Real, momentum: Vec3) {
        let s = self.slot_mut(node);
        self.mass[s] += mass;
        self.momentum[s] += momentum;
    }

    pub fn total_mass(&self) -> Real {
        self.mass.iter().sum()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.momentum.iter().sum()
    }

    /// `Σ m_i v_i` over nodes.
    pub fn total_velocity_momentum(&self) -> Vec3 {
        self.mass
            .iter()
            .zip(&self.velocity)
            .map(|(m, v)| v * *m)
            .sum()
    }
}
