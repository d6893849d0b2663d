//! Surface discrepancy metrics: Chamfer distance, F-score, signed distance
//! and penetration depth.
//!
//! Chamfer distance is the symmetric mean of squared nearest-neighbour
//! distances, `0.5 mean_a d(a, B)^2 + 0.5 mean_b d(b, A)^2`. F-score compares
//! unsquared distances against the threshold and is reported in percent.

use std::collections::HashMap;

use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::MetricsError;
use crate::geometry::{TriMesh, Vec3};
use crate::Real;

/// Default F-score threshold in scene units.
pub const DEFAULT_TAU: Real = 0.001;

/// Points sampled from a surface. Never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSampleSet {
    points: Vec<Vec3>,
}

impl PointSampleSet {
    pub fn new(points: Vec<Vec3>) -> Result<Self, MetricsError> {
        if points.is_empty() {
            return Err(MetricsError::EmptySet);
        }
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(MetricsError::NonFinite);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `n` area-weighted uniform samples from the surface of `mesh`.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<PointSampleSet, MetricsError> {
    if n == 0 {
        return Err(MetricsError::NoSamples);
    }
    let mut cumulative = Vec::with_capacity(mesh.face_count());
    let mut total = 0.0;
    for f in &mesh.faces {
        let [a, b, c] = f.map(|i| mesh.vertices[i]);
        total += 0.5 * (b - a).cross(&(c - a)).norm();
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(MetricsError::ZeroArea);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let t = rng.random::<Real>() * total;
            let face = cumulative.partition_point(|&c| c <= t).min(cumulative.len() - 1);
            let [a, b, c] = mesh.faces[face].map(|i| mesh.vertices[i]);
            let (mut u, mut v) = (rng.random::<Real>(), rng.random::<Real>());
            if u + v > 1.0 {
                (u, v) = (1.0 - u, 1.0 - v);
            }
            a + (b - a) * u + (c - a) * v
        })
        .collect();
    PointSampleSet::new(points)
}

/// k-d tree over a point set for nearest-neighbour queries.
pub struct NearestIndex {
    tree: ImmutableKdTree<Real, u64, 3, 32>,
}

impl NearestIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let raw: Vec<[Real; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        Self {
            tree: ImmutableKdTree::new_from_slice(&raw),
        }
    }

    /// Squared distance to the nearest point and its index.
    pub fn nearest(&self, p: &Vec3) -> (Real, usize) {
        let nn = self.tree.nearest_one::<SquaredEuclidean>(&[p.x, p.y, p.z]);
        (nn.distance, nn.item as usize)
    }
}

/// Squared distance from every point of `from` to its nearest point in `to`.
pub fn nearest_squared_distances(from: &PointSampleSet, to: &PointSampleSet) -> Vec<Real> {
    let index = NearestIndex::new(to.points());
    from.points()
        .par_iter()
        .with_min_len(1024)
        .map(|p| index.nearest(p).0)
        .collect()
}

fn mean(v: &[Real]) -> Real {
    v.iter().sum::<Real>() / v.len() as Real
}

pub fn chamfer_distance(a: &PointSampleSet, b: &PointSampleSet) -> Real {
    0.5 * mean(&nearest_squared_distances(a, b)) + 0.5 * mean(&nearest_squared_distances(b, a))
}

/// F-score in percent at distance threshold `tau`.
pub fn f_score(a: &PointSampleSet, b: &PointSampleSet, tau: Real) -> Result<Real, MetricsError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(MetricsError::InvalidThreshold(tau));
    }
    let within = |d: &[Real]| d.iter().filter(|d| d.sqrt() <= tau).count() as Real / d.len() as Real;
    let precision = within(&nearest_squared_distances(a, b));
    let recall = within(&nearest_squared_distances(b, a));
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(200.0 * precision * recall / (precision + recall))
}

/// Closest point to `p` on triangle `abc`.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Signed solid angle of triangle `abc` seen from `p`, over `4 pi`.
fn winding_contribution(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Real {
    let (x, y, z) = (a - p, b - p, c - p);
    let (lx, ly, lz) = (x.norm(), y.norm(), z.norm());
    let det = x.dot(&y.cross(&z));
    let den = lx * ly * lz + x.dot(&y) * lz + y.dot(&z) * lx + z.dot(&x) * ly;
    2.0 * det.atan2(den) / (4.0 * std::f64::consts::PI)
}

/// True when every directed edge is matched by exactly one opposite edge.
pub fn is_closed(mesh: &TriMesh) -> bool {
    let mut count: HashMap<(usize, usize), i32> = HashMap::new();
    for f in &mesh.faces {
        for k in 0..3 {
            *count.entry((f[k], f[(k + 1) % 3])).or_default() += 1;
        }
    }
    count
        .iter()
        .all(|(&(a, b), &n)| n == 1 && count.get(&(b, a)) == Some(&1))
}

/// Signed distance queries against a body mesh, negative inside. The inside
/// test is the generalized winding number, so signs are only meaningful for
/// closed, outward-oriented bodies; [`SignedDistanceField::closed`] reports that.
pub struct SignedDistanceField<'a> {
    body: &'a TriMesh,
    pub closed: bool,
}

impl<'a> SignedDistanceField<'a> {
    pub fn new(body: &'a TriMesh) -> Self {
        let closed = is_closed(body);
        if !closed {
            log::warn!("body mesh is not closed; inside/outside signs are unreliable");
        }
        Self { body, closed }
    }

    pub fn unsigned(&self, p: &Vec3) -> Real {
        self.body
            .faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.body.vertices[i]);
                (closest_point_on_triangle(p, &a, &b, &c) - p).norm_squared()
            })
            .fold(Real::INFINITY, Real::min)
            .sqrt()
    }

    pub fn winding_number(&self, p: &Vec3) -> Real {
        self.body
            .faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.body.vertices[i]);
                winding_contribution(p, &a, &b, &c)
            })
            .sum()
    }

    pub fn distance(&self, p: &Vec3) -> Real {
        let d = self.unsigned(p);
        if self.winding_number(p) > 0.5 {
            -d
        } else {
            d
        }
    }
}

pub fn signed_distance(point: &Vec3, body: &TriMesh) -> Real {
    SignedDistanceField::new(body).distance(point)
}

/// Mean over cloth vertices of `max(0, -signed distance)`.
pub fn penetration_depth(cloth: &TriMesh, body: &TriMesh) -> Result<Real, MetricsError> {
    if cloth.vertices.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let sdf = SignedDistanceField::new(body);
    let total: Real = cloth
        .vertices
        .par_iter()
        .map(|p| (-sdf.distance(p)).max(0.0))
        .sum();
    Ok(total / cloth.vertices.len() as Real)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{box_mesh, icosphere};
    use nalgebra::Rotation3;

    fn set(points: Vec<Vec3>) -> PointSampleSet {
        PointSampleSet::new(points).unwrap()
    }

    fn random_points(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect()
    }

    fn brute_nearest(p: &Vec3, set: &[Vec3]) -> Real {
        set.iter().map(|q| (p - q).norm_squared()).fold(Real::INFINITY, Real::min)
    }

    #[test]
    fn kd_tree_matches_brute_force() {
        let a = set(random_points(500, 1));
        let b = set(random_points(300, 2));
        let d = nearest_squared_distances(&a, &b);
        for (p, d) in a.points().iter().zip(&d) {
            assert_eq!(*d, brute_nearest(p, b.points()));
        }
    }

    #[test]
    fn chamfer_examples() {
        let a = set(random_points(200, 3));
        assert_eq!(chamfer_distance(&a, &a), 0.0);
        let one = set(vec![Vec3::zeros()]);
        let other = set(vec![Vec3::x()]);
        assert_eq!(chamfer_distance(&one, &other), 1.0);
    }

    #[test]
    fn chamfer_is_symmetric_and_isometry_invariant() {
        let a = random_points(200, 4);
        let b = random_points(150, 5);
        let (sa, sb) = (set(a.clone()), set(b.clone()));
        let cd = chamfer_distance(&sa, &sb);
        assert_eq!(cd, chamfer_distance(&sb, &sa));
        let r = Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let t = Vec3::new(0.5, -2.0, 1.0);
        let move_all = |v: &[Vec3]| set(v.iter().map(|p| r * p + t).collect());
        let moved = chamfer_distance(&move_all(&a), &move_all(&b));
        assert!((moved - cd).abs() < 1e-12);
    }

    #[test]
    fn f_score_examples() {
        let tau = DEFAULT_TAU;
        let b: Vec<Vec3> = (0..99).map(|i| Vec3::new(i as Real, 0.0, 0.0)).collect();
        let sb = set(b.clone());
        assert_eq!(f_score(&sb, &sb, tau).unwrap(), 100.0);

        let mut a = b.clone();
        a.push(Vec3::new(0.0, 10.0 * tau, 0.0));
        let f = f_score(&set(a), &sb, tau).unwrap();
        let expected = 200.0 * 0.99 / 1.99;
        assert!((f - expected).abs() < 1e-9);
        assert!((f - 99.497).abs() < 5e-4);

        let far = set(b.iter().map(|p| p + Vec3::z()).collect());
        assert_eq!(f_score(&far, &sb, tau).unwrap(), 0.0);
        assert!(f_score(&sb, &sb, 0.0).is_err());
    }

    #[test]
    fn f_score_monotone_in_tau() {
        let a = set(random_points(300, 6));
        let b = set(random_points(300, 7));
        let mut last = 100.0;
        for tau in [1.0, 0.3, 0.1, 0.05, 0.02, 0.01, 0.001] {
            let f = f_score(&a, &b, tau).unwrap();
            assert!(f <= last);
            last = f;
        }
    }

    #[test]
    fn samples_lie_on_triangle_and_repeat() {
        let mesh = TriMesh::new(
            vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(2.0, 0.5, 1.5), Vec3::new(0.3, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let s = sample_surface(&mesh, 1000, 9).unwrap();
        assert_eq!(s.len(), 1000);
        let [a, b, c] = [0, 1, 2].map(|i| mesh.vertices[i]);
        let n = (b - a).cross(&(c - a)).normalize();
        for p in s.points() {
            assert!((p - a).dot(&n).abs() < 1e-12);
            let q = closest_point_on_triangle(p, &a, &b, &c);
            assert!((q - p).norm() < 1e-12);
        }
        assert_eq!(s, sample_surface(&mesh, 1000, 9).unwrap());
        assert_ne!(s, sample_surface(&mesh, 1000, 10).unwrap());
    }

    #[test]
    fn samples_follow_face_area() {
        // areas 1 and 3
        let mesh = TriMesh::new(
            vec![
                Vec3::zeros(),
                Vec3::new(2.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(10.0, 0.0, 0.0),
                Vec3::new(12.0, 0.0, 0.0),
                Vec3::new(10.0, 3.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let s = sample_surface(&mesh, 100_000, 11).unwrap();
        let second = s.points().iter().filter(|p| p.x >= 5.0).count() as Real / 1e5;
        assert!((second - 0.75).abs() < 0.01, "{second}");
    }

    #[test]
    fn sampling_errors() {
        let flat = TriMesh {
            vertices: vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0],
            faces: vec![[0, 1, 2]],
        };
        assert!(matches!(sample_surface(&flat, 10, 0), Err(MetricsError::ZeroArea)));
        let tri = TriMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(sample_surface(&tri, 0, 0), Err(MetricsError::NoSamples)));
        assert!(PointSampleSet::new(vec![]).is_err());
    }

    #[test]
    fn cube_distances() {
        let cube = box_mesh(Vec3::zeros(), Vec3::repeat(1.0));
        assert!(is_closed(&cube));
        assert!((signed_distance(&Vec3::repeat(0.5), &cube) + 0.5).abs() < 1e-12);
        assert!(signed_distance(&Vec3::new(0.3, 1.0, 0.6), &cube).abs() < 1e-9);
        assert!(signed_distance(&Vec3::new(1.0, 0.25, 0.0), &cube).abs() < 1e-9);
        assert!((signed_distance(&Vec3::new(0.5, 0.5, 3.0), &cube) - 2.0).abs() < 1e-12);
        let corner = Vec3::new(2.0, 2.0, 2.0);
        assert!((signed_distance(&corner, &cube) - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn open_body_is_flagged() {
        let mut cube = box_mesh(Vec3::zeros(), Vec3::repeat(1.0));
        cube.faces.pop();
        assert!(!SignedDistanceField::new(&cube).closed);
    }

    #[test]
    fn penetration_examples() {
        let body = box_mesh(Vec3::zeros(), Vec3::repeat(1.0));
        let outside = TriMesh {
            vertices: (0..100).map(|i| Vec3::new(2.0 + i as Real * 0.01, 0.5, 0.5)).collect(),
            faces: vec![],
        };
        assert_eq!(penetration_depth(&outside, &body).unwrap(), 0.0);

        let mut one_in = outside.clone();
        one_in.vertices[17] = Vec3::new(0.3, 0.5, 0.5);
        assert!((penetration_depth(&one_in, &body).unwrap() - 0.003).abs() < 1e-12);

        let deep = TriMesh {
            vertices: vec![Vec3::repeat(0.5), Vec3::new(0.4, 0.5, 0.45), Vec3::new(0.6, 0.4, 0.5)],
            faces: vec![],
        };
        assert!(penetration_depth(&deep, &body).unwrap() >= 0.35);
    }

    /// Independent oracle: per-triangle distance by projection onto the plane
    /// or the nearest edge, sign by crossing parity along a skewed ray.
    fn oracle_signed_distance(p: &Vec3, body: &TriMesh) -> Real {
        fn segment(p: &Vec3, a: &Vec3, b: &Vec3) -> Real {
            let ab = b - a;
            let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            (a + ab * t - p).norm()
        }
        let mut best = Real::INFINITY;
        let dir = Vec3::new(0.5773, 0.5779, 0.5769).normalize();
        let mut crossings = 0;
        for f in &body.faces {
            let [a, b, c] = f.map(|i| body.vertices[i]);
            let n = (b - a).cross(&(c - a)).normalize();
            let proj = p - n * (p - a).dot(&n);
            let inside = [(a, b), (b, c), (c, a)]
                .iter()
                .all(|(u, v)| (v - u).cross(&(proj - u)).dot(&n) >= 0.0);
            let d = if inside {
                (p - proj).norm()
            } else {
                segment(p, &a, &b).min(segment(p, &b, &c)).min(segment(p, &c, &a))
            };
            best = best.min(d);
            // Moller-Trumbore
            let (e1, e2) = (b - a, c - a);
            let h = dir.cross(&e2);
            let det = e1.dot(&h);
            if det.abs() > 1e-14 {
                let s = p - a;
                let u = s.dot(&h) / det;
                let q = s.cross(&e1);
                let v = dir.dot(&q) / det;
                let t = e2.dot(&q) / det;
                if u >= 0.0 && v >= 0.0 && u + v <= 1.0 && t > 0.0 {
                    crossings += 1;
                }
            }
        }
        if crossings % 2 == 1 {
            -best
        } else {
            best
        }
    }

    #[test]
    fn signed_distance_matches_oracle_on_sphere() {
        let body = icosphere(Vec3::new(0.1, -0.2, 0.3), 0.7, 1);
        assert!(body.face_count() <= 200);
        let sdf = SignedDistanceField::new(&body);
        assert!(sdf.closed);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..500 {
            let p = Vec3::new(
                rng.random_range(-1.2..1.4),
                rng.random_range(-1.5..1.1),
                rng.random_range(-1.0..1.6),
            );
            let ours = sdf.distance(&p);
            let oracle = oracle_signed_distance(&p, &body);
            assert!((ours.abs() - oracle.abs()).abs() < 1e-9, "{p:?}");
            if oracle.abs() > 1e-9 {
                assert_eq!(ours < 0.0, oracle < 0.0, "{p:?}");
            }
        }
    }
}
