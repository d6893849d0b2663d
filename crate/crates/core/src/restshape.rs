//! Rest geometry recovered from a gravity-loaded observation.
//!
//! Every rest edge keeps its component orthogonal to gravity and scales its
//! component along gravity by `alpha`: `e_rest = e_perp + alpha * e_g`.

use crate::error::RestShapeError;
use crate::geometry::{MaterialFrame, TriMesh, Vec3};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestShapeParam {
    pub alpha: Real,
    pub gravity_dir: Vec3,
}

impl RestShapeParam {
    pub fn new(alpha: Real, gravity_dir: Vec3) -> Result<Self, RestShapeError> {
        let p = Self { alpha, gravity_dir };
        p.validate()?;
        Ok(p)
    }

    /// Gravity direction taken from an acceleration vector; a zero vector falls
    /// back to `-y`.
    pub fn from_gravity(alpha: Real, gravity: &Vec3) -> Result<Self, RestShapeError> {
        let n = gravity.norm();
        let dir = if n > 0.0 { gravity / n } else { -Vec3::y() };
        Self::new(alpha, dir)
    }

    pub fn validate(&self) -> Result<(), RestShapeError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(RestShapeError::AlphaOutOfRange(self.alpha));
        }
        if !((self.gravity_dir.norm() - 1.0).abs() <= 1e-12) {
            return Err(RestShapeError::GravityNotUnit);
        }
        Ok(())
    }
}

/// Splits `e` into `(e_g, e_perp)`, the parts along and across `g_dir`.
///
/// The sum `e_g + e_perp` reproduces `e` to within one ulp of the larger part;
/// when the parts cancel heavily no floating-point split is exact.
pub fn decompose_edge(e: &Vec3, g_dir: &Vec3) -> (Vec3, Vec3) {
    let along = g_dir * e.dot(g_dir);
    (along, e - along)
}

pub fn apply_rest_alpha(e: &Vec3, alpha: Real, g_dir: &Vec3) -> Vec3 {
    if alpha == 1.0 {
        return *e;
    }
    let (along, perp) = decompose_edge(e, g_dir);
    perp + along * alpha
}

/// Per-face rest frames from the compensated edges `b - a` and `c - a`.
pub fn build_rest_state(
    canonical: &TriMesh,
    param: &RestShapeParam,
) -> Result<Vec<MaterialFrame>, RestShapeError> {
    param.validate()?;
    canonical
        .faces
        .iter()
        .enumerate()
        .map(|(face, f)| {
            let a = canonical.vertices[f[0]];
            let e1 = apply_rest_alpha(&(canonical.vertices[f[1]] - a), param.alpha, &param.gravity_dir);
            let e2 = apply_rest_alpha(&(canonical.vertices[f[2]] - a), param.alpha, &param.gravity_dir);
            MaterialFrame::from_edges(e1, e2).ok_or(RestShapeError::DegenerateFace {
                face,
                alpha: param.alpha,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{grid_patch, material_frames};
    use proptest::prelude::*;

    const DOWN_Z: Vec3 = Vec3::new(0.0, 0.0, -1.0);

    #[test]
    fn decomposition_examples() {
        assert_eq!(
            decompose_edge(&Vec3::new(0.0, 0.0, -2.0), &DOWN_Z),
            (Vec3::new(0.0, 0.0, -2.0), Vec3::zeros())
        );
        assert_eq!(
            decompose_edge(&Vec3::new(1.0, 0.0, 0.0), &DOWN_Z),
            (Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0))
        );
        assert_eq!(
            decompose_edge(&Vec3::new(1.0, 0.0, -2.0), &DOWN_Z),
            (Vec3::new(0.0, 0.0, -2.0), Vec3::new(1.0, 0.0, 0.0))
        );
    }

    #[test]
    fn alpha_examples() {
        let e = Vec3::new(1.0, 0.0, -2.0);
        assert_eq!(apply_rest_alpha(&e, 1.0, &DOWN_Z), e);
        assert_eq!(apply_rest_alpha(&e, 0.0, &DOWN_Z), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(apply_rest_alpha(&e, 0.5, &DOWN_Z), Vec3::new(1.0, 0.0, -1.0));
    }

    #[test]
    fn param_validation() {
        assert!(RestShapeParam::new(1.2, DOWN_Z).is_err());
        assert!(RestShapeParam::new(-0.1, DOWN_Z).is_err());
        assert!(RestShapeParam::new(0.5, Vec3::new(0.0, 0.0, -2.0)).is_err());
        assert!(RestShapeParam::from_gravity(0.5, &Vec3::new(0.0, -9.8, 0.0)).is_ok());
    }

    #[test]
    fn unit_alpha_reproduces_canonical_frames() {
        let mesh = grid_patch(
            Vec3::zeros(),
            Vec3::new(1.0, 0.2, 0.0),
            Vec3::new(0.0, -1.0, 0.3),
            5,
            4,
        );
        let param = RestShapeParam::from_gravity(1.0, &Vec3::new(0.0, -9.8, 0.0)).unwrap();
        assert_eq!(build_rest_state(&mesh, &param).unwrap(), material_frames(&mesh).unwrap());
    }

    #[test]
    fn horizontal_mesh_ignores_alpha() {
        let mesh = grid_patch(Vec3::zeros(), Vec3::x(), Vec3::z(), 4, 4);
        let g = Vec3::new(0.0, -9.8, 0.0);
        let full = build_rest_state(&mesh, &RestShapeParam::from_gravity(1.0, &g).unwrap()).unwrap();
        for alpha in [0.0, 0.3, 0.9] {
            let frames =
                build_rest_state(&mesh, &RestShapeParam::from_gravity(alpha, &g).unwrap()).unwrap();
            assert_eq!(frames, full);
        }
    }

    #[test]
    fn vertical_strip_edges_halve() {
        // unit square in the xy-plane, y up; gravity along -y
        let mesh = grid_patch(Vec3::zeros(), Vec3::x(), Vec3::y(), 2, 2);
        let param = RestShapeParam::from_gravity(0.5, &Vec3::new(0.0, -9.8, 0.0)).unwrap();
        let frames = build_rest_state(&mesh, &param).unwrap();
        let canonical = material_frames(&mesh).unwrap();
        for (rest, canon) in frames.iter().zip(&canonical) {
            for k in 0..2 {
                let (r, c) = (rest.d.column(k), canon.d.column(k));
                assert_eq!(r.x, c.x);
                assert_eq!(r.z, c.z);
                assert_eq!(r.y, 0.5 * c.y);
            }
        }
    }

    #[test]
    fn collapsing_face_is_reported() {
        // a face with purely vertical edges collapses at alpha = 0
        let mesh = TriMesh::new(
            vec![Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0), Vec3::new(1.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let param = RestShapeParam::from_gravity(0.0, &Vec3::new(0.0, -1.0, 0.0)).unwrap();
        assert!(matches!(
            build_rest_state(&mesh, &param),
            Err(RestShapeError::DegenerateFace { face: 0, .. })
        ));
    }

    fn unit_dir() -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-1.0..1.0f64)
            .prop_filter("nonzero", |v| Vec3::from(*v).norm() > 1e-2)
            .prop_map(|v| Vec3::from(v).normalize())
    }

    proptest! {
        #[test]
        fn decomposition_is_exact(e in prop::array::uniform3(-10.0..10.0f64), g in unit_dir()) {
            let e = Vec3::from(e);
            let (along, perp) = decompose_edge(&e, &g);
            let sum = along + perp;
            for k in 0..3 {
                let ulp = along[k].abs().max(perp[k].abs()) * Real::EPSILON;
                prop_assert!((sum[k] - e[k]).abs() <= ulp);
            }
            prop_assert!(perp.dot(&g).abs() < 1e-12 * e.norm().max(1.0));
        }

        #[test]
        fn rest_length_grows_with_alpha(
            e in prop::array::uniform3(-10.0..10.0f64),
            g in unit_dir(),
            a in 0.0..1.0f64,
            b in 0.0..1.0f64,
        ) {
            let e = Vec3::from(e);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(apply_rest_alpha(&e, lo, &g).norm() <= apply_rest_alpha(&e, hi, &g).norm() + 1e-12);
        }
    }
}
