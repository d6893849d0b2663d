//! Triangle meshes, mesh sequences and the per-face frames derived from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::MeshError;
use crate::Real;

pub type Vec3 = Vector3<Real>;
pub type Mat3 = Matrix3<Real>;

/// Faces with area below this are degenerate (scene units squared).
pub const DEGENERATE_AREA_EPS: Real = 1e-12;

/// Material frames with `|det D|` below this are rejected as singular.
pub const SINGULAR_FRAME_EPS: Real = 1e-14;

/// What to do with a zero-area face while validating a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegeneratePolicy {
    #[default]
    Reject,
    Warn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Builds a mesh and checks indices, repeated vertices and face areas.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        Self::with_policy(vertices, faces, DegeneratePolicy::Reject)
    }

    pub fn with_policy(
        vertices: Vec<Vec3>,
        faces: Vec<[usize; 3]>,
        policy: DegeneratePolicy,
    ) -> Result<Self, MeshError> {
        let mesh = Self { vertices, faces };
        mesh.validate(policy)?;
        Ok(mesh)
    }

    pub fn validate(&self, policy: DegeneratePolicy) -> Result<(), MeshError> {
        let n = self.vertices.len();
        for (face, tri) in self.faces.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= n) {
                return Err(MeshError::IndexOutOfRange {
                    face,
                    index,
                    vertex_count: n,
                });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::RepeatedVertex { face });
            }
            let area = triangle_area(&self.vertices, tri);
            if !(area >= DEGENERATE_AREA_EPS) {
                match policy {
                    DegeneratePolicy::Reject => {
                        return Err(MeshError::DegenerateFace { face, area });
                    }
                    DegeneratePolicy::Warn => {
                        log::warn!("face {face} is degenerate (area {area:e})");
                    }
                }
            }
        }
        if let Some(i) = self.vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(MeshError::NonFiniteVertex { vertex: i });
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn total_area(&self) -> Real {
        self.faces
            .iter()
            .map(|f| triangle_area(&self.vertices, f))
            .sum()
    }

    /// Axis-aligned bounding box as `(min, max)`. `None` for a mesh without vertices.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        bounds_of(&self.vertices)
    }

    /// Same topology with new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self, MeshError> {
        if vertices.len() != self.vertices.len() {
            return Err(MeshError::VertexCountMismatch {
                expected: self.vertices.len(),
                found: vertices.len(),
            });
        }
        Ok(Self {
            vertices,
            faces: self.faces.clone(),
        })
    }

    /// Concatenates two meshes, offsetting the indices of `other`.
    pub fn merged(&self, other: &TriMesh) -> TriMesh {
        let offset = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(
            other
                .faces
                .iter()
                .map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]),
        );
        TriMesh { vertices, faces }
    }
}

pub(crate) fn bounds_of(points: &[Vec3]) -> Option<(Vec3, Vec3)> {
    let first = *points.first()?;
    Some(points.iter().fold((first, first), |(lo, hi), p| {
        (lo.inf(p), hi.sup(p))
    }))
}

fn triangle_area(vertices: &[Vec3], f: &[usize; 3]) -> Real {
    let a = vertices[f[0]];
    0.5 * (vertices[f[1]] - a).cross(&(vertices[f[2]] - a)).norm()
}

/// Time-indexed vertex arrays over one shared face list.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshSequence {
    faces: Vec<[usize; 3]>,
    vertex_count: usize,
    frames: Vec<Vec<Vec3>>,
    frame_dt: Real,
}

impl MeshSequence {
    pub fn new(
        faces: Vec<[usize; 3]>,
        vertex_count: usize,
        frames: Vec<Vec<Vec3>>,
        frame_dt: Real,
    ) -> Result<Self, MeshError> {
        if !(frame_dt > 0.0) {
            return Err(MeshError::InvalidFrameDt(frame_dt));
        }
        for (frame, verts) in frames.iter().enumerate() {
            if verts.len() != vertex_count {
                return Err(MeshError::FrameVertexCount {
                    frame,
                    expected: vertex_count,
                    found: verts.len(),
                });
            }
        }
        Ok(Self {
            faces,
            vertex_count,
            frames,
            frame_dt,
        })
    }

    /// Builds a sequence from whole meshes, which must share one face list.
    pub fn from_meshes(meshes: Vec<TriMesh>, frame_dt: Real) -> Result<Self, MeshError> {
        let Some(first) = meshes.first() else {
            return Err(MeshError::EmptySequence);
        };
        let faces = first.faces.clone();
        let vertex_count = first.vertex_count();
        let mut frames = Vec::with_capacity(meshes.len());
        for (frame, mesh) in meshes.into_iter().enumerate() {
            if mesh.faces != faces {
                return Err(MeshError::TopologyMismatch { frame });
            }
            frames.push(mesh.vertices);
        }
        Self::new(faces, vertex_count, frames, frame_dt)
    }

    /// A sequence holding `mesh` unchanged for `len` frames.
    pub fn constant(mesh: &TriMesh, len: usize, frame_dt: Real) -> Result<Self, MeshError> {
        Self::new(
            mesh.faces.clone(),
            mesh.vertex_count(),
            vec![mesh.vertices.clone(); len],
            frame_dt,
        )
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn frame_dt(&self) -> Real {
        self.frame_dt
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Vec<Vec3>] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> Option<&[Vec3]> {
        self.frames.get(i).map(Vec::as_slice)
    }

    pub fn mesh(&self, i: usize) -> Option<TriMesh> {
        self.frames.get(i).map(|v| TriMesh {
            vertices: v.clone(),
            faces: self.faces.clone(),
        })
    }

    pub fn push_frame(&mut self, vertices: Vec<Vec3>) -> Result<(), MeshError> {
        if vertices.len() != self.vertex_count {
            return Err(MeshError::FrameVertexCount {
                frame: self.frames.len(),
                expected: self.vertex_count,
                found: vertices.len(),
            });
        }
        self.frames.push(vertices);
        Ok(())
    }

    /// First `len` frames.
    pub fn truncated(&self, len: usize) -> Self {
        Self {
            faces: self.faces.clone(),
            vertex_count: self.vertex_count,
            frames: self.frames.iter().take(len).cloned().collect(),
            frame_dt: self.frame_dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceFrame {
    pub barycenter: Vec3,
    /// Unit normal, or zero for a degenerate face.
    pub normal: Vec3,
    pub area: Real,
}

impl FaceFrame {
    pub fn from_corners(a: &Vec3, b: &Vec3, c: &Vec3) -> Self {
        let cross = (b - a).cross(&(c - a));
        let len = cross.norm();
        let area = 0.5 * len;
        let normal = if area >= DEGENERATE_AREA_EPS {
            cross / len
        } else {
            Vec3::zeros()
        };
        Self {
            barycenter: (a + b + c) / 3.0,
            normal,
            area,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.normal == Vec3::zeros()
    }
}

/// Barycenter, unit normal and area of every face. Degenerate faces get a zero
/// normal; check [`FaceFrame::is_degenerate`].
pub fn face_frames(mesh: &TriMesh) -> Vec<FaceFrame> {
    face_frames_of(&mesh.vertices, &mesh.faces)
}

pub(crate) fn face_frames_of(vertices: &[Vec3], faces: &[[usize; 3]]) -> Vec<FaceFrame> {
    faces
        .iter()
        .map(|f| FaceFrame::from_corners(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]))
        .collect()
}

/// Rest material directions of one face.
///
/// Columns of `d` are the two rest edges and the rest unit normal. `local_inv`
/// is the inverse of the same frame expressed in the face's own orthonormal
/// basis (first tangent along the first edge, third axis along the normal);
/// the simulator measures deformation against it so that the third axis of the
/// deformation gradient is always the surface normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialFrame {
    pub d: Mat3,
    pub d_inv: Mat3,
    pub local_inv: Mat3,
}

impl MaterialFrame {
    /// Builds the frame from two rest edge vectors; the normal is their
    /// normalized cross product.
    pub fn from_edges(e1: Vec3, e2: Vec3) -> Option<Self> {
        let cross = e1.cross(&e2);
        let len = cross.norm();
        if !(0.5 * len >= DEGENERATE_AREA_EPS) {
            return None;
        }
        let normal = cross / len;
        let d = Mat3::from_columns(&[e1, e2, normal]);
        if !(d.determinant().abs() > SINGULAR_FRAME_EPS) {
            return None;
        }
        let d_inv = d.try_inverse()?;

        let t1 = e1.normalize();
        let t2 = normal.cross(&t1);
        let local = Mat3::new(
            e1.norm(),
            t1.dot(&e2),
            0.0,
            0.0,
            t2.dot(&e2),
            0.0,
            0.0,
            0.0,
            1.0,
        );
        let local_inv = local.try_inverse()?;
        Some(Self { d, d_inv, local_inv })
    }

    /// Rest area of the face.
    pub fn area(&self) -> Real {
        0.5 * self.d.column(0).cross(&self.d.column(1)).norm()
    }
}

/// Rest frames taken directly from the mesh: `D = [b - a, c - a, n]`.
pub fn material_frames(mesh: &TriMesh) -> Result<Vec<MaterialFrame>, MeshError> {
    mesh.faces
        .iter()
        .enumerate()
        .map(|(face, f)| {
            let a = mesh.vertices[f[0]];
            MaterialFrame::from_edges(mesh.vertices[f[1]] - a, mesh.vertices[f[2]] - a)
                .ok_or(MeshError::SingularFrame { face })
        })
        .collect()
}

/// One entry per undirected edge, keyed `(lo, hi)` and pointing from `lo` to `hi`.
pub fn edge_vectors(mesh: &TriMesh) -> Vec<((usize, usize), Vec3)> {
    let mut edges = BTreeMap::new();
    for f in &mesh.faces {
        for k in 0..3 {
            let (i, j) = (f[k], f[(k + 1) % 3]);
            let key = (i.min(j), i.max(j));
            edges
                .entry(key)
                .or_insert_with(|| mesh.vertices[key.1] - mesh.vertices[key.0]);
        }
    }
    edges.into_iter().collect()
}

// ---------------------------------------------------------------------------
// File I/O

/// Reads a Wavefront OBJ holding `v` and triangular `f` records.
pub fn load_mesh(path: &Path) -> Result<TriMesh, MeshError> {
    load_mesh_with(path, DegeneratePolicy::Reject)
}

pub fn load_mesh_with(path: &Path, policy: DegeneratePolicy) -> Result<TriMesh, MeshError> {
    let text = fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (vertices, faces) = parse_obj(&text).map_err(|(line, message)| MeshError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })?;
    TriMesh::with_policy(vertices, faces, policy)
}

type ParseResult = Result<(Vec<Vec3>, Vec<[usize; 3]>), (usize, String)>;

pub fn parse_obj(text: &str) -> ParseResult {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<Real> = tokens
                    .take(3)
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|e| (lineno, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 {
                    return Err((lineno, "vertex needs three coordinates".into()));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let refs: Vec<&str> = tokens.collect();
                if refs.len() != 3 {
                    return Err((
                        lineno,
                        format!("only triangles are supported, face has {} vertices", refs.len()),
                    ));
                }
                let mut tri = [0usize; 3];
                for (slot, r) in tri.iter_mut().zip(&refs) {
                    // `f 1/2/3` carries texture and normal indices after the slash
                    let head = r.split('/').next().unwrap_or("");
                    let idx: i64 = head
                        .parse()
                        .map_err(|e| (lineno, format!("bad face index {r:?}: {e}")))?;
                    *slot = if idx > 0 {
                        (idx - 1) as usize
                    } else if idx < 0 && (-idx) as usize <= vertices.len() {
                        vertices.len() - (-idx) as usize
                    } else {
                        return Err((lineno, format!("invalid face index {idx}")));
                    };
                }
                faces.push(tri);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

pub fn obj_string(vertices: &[Vec3], faces: &[[usize; 3]]) -> String {
    let mut out = String::with_capacity(vertices.len() * 48 + faces.len() * 24);
    for v in vertices {
        // shortest round-trip representation
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn ply_string(vertices: &[Vec3], faces: &[[usize; 3]]) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        vertices.len(),
        faces.len()
    );
    for v in vertices {
        let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
    }
    for f in faces {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    #[default]
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MeshFormat::Obj => "obj",
            MeshFormat::Ply => "ply",
        }
    }
}

pub fn write_mesh(path: &Path, mesh: &TriMesh, format: MeshFormat) -> Result<(), MeshError> {
    write_vertices(path, &mesh.vertices, &mesh.faces, format)
}

pub fn write_vertices(
    path: &Path,
    vertices: &[Vec3],
    faces: &[[usize; 3]],
    format: MeshFormat,
) -> Result<(), MeshError> {
    let text = match format {
        MeshFormat::Obj => obj_string(vertices, faces),
        MeshFormat::Ply => ply_string(vertices, faces),
    };
    fs::write(path, text).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a mesh sequence from either a directory of numbered `.obj` files
/// (lexicographic order) or a manifest file listing one mesh path per line.
/// Manifest paths are relative to the manifest; `#` starts a comment.
pub fn load_sequence(path: &Path, frame_dt: Real) -> Result<MeshSequence, MeshError> {
    let files = sequence_files(path)?;
    let meshes = files
        .iter()
        .map(|p| load_mesh_with(p, DegeneratePolicy::Warn))
        .collect::<Result<Vec<_>, _>>()?;
    MeshSequence::from_meshes(meshes, frame_dt)
}

pub fn sequence_files(path: &Path) -> Result<Vec<PathBuf>, MeshError> {
    let io_err = |source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    };
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("obj"))
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(MeshError::EmptySequence);
        }
        Ok(files)
    } else {
        let text = fs::read_to_string(path).map_err(io_err)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let files: Vec<PathBuf> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| base.join(l))
            .collect();
        if files.is_empty() {
            return Err(MeshError::EmptySequence);
        }
        Ok(files)
    }
}

// ---------------------------------------------------------------------------
// Procedural meshes used by scenarios, tests and the CLI.

/// A rectangular grid of `nx × ny` vertices spanning the parallelogram
/// `origin + s u + t v`, `s, t` in `[0, 1]`.
pub fn grid_patch(origin: Vec3, u: Vec3, v: Vec3, nx: usize, ny: usize) -> TriMesh {
    assert!(nx >= 2 && ny >= 2, "grid needs at least 2x2 vertices");
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let s = i as Real / (nx - 1) as Real;
            let t = j as Real / (ny - 1) as Real;
            vertices.push(origin + u * s + v * t);
        }
    }
    let mut faces = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let a = j * nx + i;
            let b = a + 1;
            let c = a + nx;
            let d = c + 1;
            // alternate the diagonal to avoid a directional bias
            if (i + j) % 2 == 0 {
                faces.push([a, b, d]);
                faces.push([a, d, c]);
            } else {
                faces.push([a, b, c]);
                faces.push([b, d, c]);
            }
        }
    }
    TriMesh { vertices, faces }
}

/// Icosahedron subdivided `levels` times and projected onto a sphere;
/// `20 · 4^levels` outward-facing triangles.
pub fn icosphere(center: Vec3, radius: Real, levels: usize) -> TriMesh {
    let t = (1.0 + (5.0 as Real).sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..levels {
        let mut midpoints: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |i: usize, j: usize, vertices: &mut Vec<Vec3>| {
            *midpoints.entry((i.min(j), i.max(j))).or_insert_with(|| {
                vertices.push(((vertices[i] + vertices[j]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut vertices);
            let bc = midpoint(f[1], f[2], &mut vertices);
            let ca = midpoint(f[2], f[0], &mut vertices);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    let vertices = vertices.into_iter().map(|v| center + v * radius).collect();
    TriMesh { vertices, faces }
}

/// Closed axis-aligned box with outward-facing triangles.
pub fn box_mesh(lo: Vec3, hi: Vec3) -> TriMesh {
    let corner = |i: usize| {
        Vec3::new(
            if i & 1 == 0 { lo.x } else { hi.x },
            if i & 2 == 0 { lo.y } else { hi.y },
            if i & 4 == 0 { lo.z } else { hi.z },
        )
    };
    let vertices = (0..8).map(corner).collect();
    let faces = vec![
        [0, 2, 3],
        [0, 3, 1],
        [4, 5, 7],
        [4, 7, 6],
        [0, 1, 5],
        [0, 5, 4],
        [2, 6, 7],
        [2, 7, 3],
        [0, 4, 6],
        [0, 6, 2],
        [1, 3, 7],
        [1, 7, 5],
    ];
    TriMesh { vertices, faces }
}
