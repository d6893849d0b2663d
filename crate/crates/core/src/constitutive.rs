//! Anisotropic strain energy for codimensional cloth.
//!
//! The deformation gradient is factored as `F = QR` with `R` upper triangular
//! and a positive diagonal, and the energy is written in terms of `R` alone:
//! the third column measures the deformation along the surface normal, the
//! upper-left 2×2 block measures in-plane stretch.
//!
//! ```text
//! psi_normal  = kappa/3 (1 - R33)^3          R33 <= 1, zero otherwise
//! psi_shear   = gamma/2 (R13^2 + R23^2)
//! psi_inplane = mu ((s1 - 1)^2 + (s2 - 1)^2) + lambda/2 (s1 s2 - 1)^2
//! ```
//!
//! with `mu = E / (2 (1 + nu))`, `lambda/2 = E nu / (2 (1 + nu)(1 - 2 nu))` and
//! `s1, s2` the singular values of the in-plane block.

use serde::{Deserialize, Serialize};

use crate::error::ConstitutiveError;
use crate::geometry::{Mat3, Vec3};
use crate::Real;

/// Diagonal entries of `R` at or below this are treated as a collapsed element.
pub const MIN_STRETCH: Real = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    /// Young's modulus.
    pub youngs: Real,
    /// Poisson's ratio.
    pub poisson: Real,
    /// Shear stiffness between the surface and its normal.
    pub shear: Real,
    /// Stiffness against normal compression.
    pub normal: Real,
}

impl Default for ElasticParams {
    fn default() -> Self {
        Self {
            youngs: 100.0,
            poisson: 0.3,
            shear: 500.0,
            normal: 500.0,
        }
    }
}

impl ElasticParams {
    pub fn validate(&self) -> Result<(), ConstitutiveError> {
        let bad = |name, value| Err(ConstitutiveError::InvalidParam { name, value });
        if !(self.youngs > 0.0 && self.youngs.is_finite()) {
            return bad("E", self.youngs);
        }
        if !(0.0..0.5).contains(&self.poisson) {
            return bad("nu", self.poisson);
        }
        if !(self.shear >= 0.0 && self.shear.is_finite()) {
            return bad("gamma", self.shear);
        }
        if !(self.normal >= 0.0 && self.normal.is_finite()) {
            return bad("kappa", self.normal);
        }
        Ok(())
    }

    /// First Lamé parameter `mu = E / (2 (1 + nu))`.
    pub fn mu(&self) -> Real {
        self.youngs / (2.0 * (1.0 + self.poisson))
    }

    /// Second Lamé parameter `lambda = E nu / ((1 + nu)(1 - 2 nu))`.
    pub fn lambda(&self) -> Real {
        self.youngs * self.poisson / ((1.0 + self.poisson) * (1.0 - 2.0 * self.poisson))
    }
}

/// `F = QR` with `Q` a proper rotation and `R` upper triangular with positive diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationState {
    pub f: Mat3,
    pub q: Mat3,
    pub r: Mat3,
}

/// `F = d · D⁻¹`.
pub fn deformation_gradient(deformed: &Mat3, rest_inv: &Mat3) -> Mat3 {
    deformed * rest_inv
}

/// Gram-Schmidt QR with a positive diagonal. The third column of `Q` is taken
/// as `q1 × q2`, so an inverted `F` shows up as a nonpositive `R33`.
pub fn qr_decompose(f: &Mat3) -> Result<DeformationState, ConstitutiveError> {
    if !f.iter().all(|x| x.is_finite()) {
        return Err(ConstitutiveError::NonFinite);
    }
    let c1: Vec3 = f.column(0).into();
    let c2: Vec3 = f.column(1).into();
    let c3: Vec3 = f.column(2).into();

    let r11 = c1.norm();
    if !(r11 > MIN_STRETCH) {
        return Err(ConstitutiveError::Inverted { index: 0, value: r11 });
    }
    let q1 = c1 / r11;
    let r12 = q1.dot(&c2);
    let u2 = c2 - q1 * r12;
    let r22 = u2.norm();
    if !(r22 > MIN_STRETCH) {
        return Err(ConstitutiveError::Inverted { index: 1, value: r22 });
    }
    let q2 = u2 / r22;
    let q3 = q1.cross(&q2);
    let r13 = q1.dot(&c3);
    let r23 = q2.dot(&c3);
    let r33 = q3.dot(&c3);
    if !(r33 > MIN_STRETCH) {
        return Err(ConstitutiveError::Inverted { index: 2, value: r33 });
    }

    let q = Mat3::from_columns(&[q1, q2, q3]);
    #[rustfmt::skip]
    let r = Mat3::new(
        r11, r12, r13,
        0.0, r22, r23,
        0.0, 0.0, r33,
    );
    Ok(DeformationState { f: *f, q, r })
}

pub fn psi_normal(r33: Real, kappa: Real) -> Real {
    if r33 <= 1.0 {
        let c = 1.0 - r33;
        kappa / 3.0 * c * c * c
    } else {
        0.0
    }
}

pub fn psi_shear(r13: Real, r23: Real, gamma: Real) -> Real {
    0.5 * gamma * (r13 * r13 + r23 * r23)
}

/// Singular values `(s1, s2)`, `s1 >= s2`, of `[[r11, r12], [0, r22]]` with `r11 r22 > 0`.
pub fn inplane_singular_values(r11: Real, r12: Real, r22: Real) -> (Real, Real) {
    // s1 + s2 = sqrt((r11 + r22)^2 + r12^2), s1 s2 = r11 r22
    let sum = (r11 + r22).hypot(r12);
    let gap = (r11 - r22).hypot(r12);
    let s1 = 0.5 * (sum + gap);
    let s2 = if s1 > 0.0 { r11 * r22 / s1 } else { 0.0 };
    (s1, s2)
}

pub fn psi_inplane(r11: Real, r12: Real, r22: Real, youngs: Real, poisson: Real) -> Real {
    let (s1, s2) = inplane_singular_values(r11, r12, r22);
    let mu = youngs / (2.0 * (1.0 + poisson));
    let half_lambda = youngs * poisson / (2.0 * (1.0 + poisson) * (1.0 - 2.0 * poisson));
    let j = s1 * s2 - 1.0;
    mu * ((s1 - 1.0).powi(2) + (s2 - 1.0).powi(2)) + half_lambda * j * j
}

/// Energy density as a function of the triangular factor.
pub fn psi_hat(r: &Mat3, p: &ElasticParams) -> Real {
    psi_normal(r[(2, 2)], p.normal)
        + psi_shear(r[(0, 2)], r[(1, 2)], p.shear)
        + psi_inplane(r[(0, 0)], r[(0, 1)], r[(1, 1)], p.youngs, p.poisson)
}

pub fn psi_total(state: &DeformationState, p: &ElasticParams) -> Real {
    psi_hat(&state.r, p)
}

/// `∂psi_hat/∂R`, upper triangular.
pub fn psi_hat_gradient(r: &Mat3, p: &ElasticParams) -> Mat3 {
    let (a, b, d) = (r[(0, 0)], r[(0, 1)], r[(1, 1)]);
    let mu = p.mu();
    let lambda = p.lambda();
    // polar rotation of the in-plane block is [[c, s], [-s, c]] with these entries
    let sum = (a + d).hypot(b);
    let c = (a + d) / sum;
    let s = b / sum;
    let j = a * d - 1.0;

    let mut g = Mat3::zeros();
    g[(0, 0)] = 2.0 * mu * (a - c) + lambda * j * d;
    g[(0, 1)] = 2.0 * mu * (b - s);
    g[(1, 1)] = 2.0 * mu * (d - c) + lambda * j * a;
    g[(0, 2)] = p.shear * r[(0, 2)];
    g[(1, 2)] = p.shear * r[(1, 2)];
    let r33 = r[(2, 2)];
    if r33 <= 1.0 {
        g[(2, 2)] = -p.normal * (1.0 - r33) * (1.0 - r33);
    }
    g
}

/// First Piola-Kirchhoff stress `∂psi/∂F`, by the chain rule through the QR
/// differential: with `A = ∂psi_hat/∂R` and `B = A Rᵀ`, `P = Q K R⁻ᵀ` where `K`
/// is `B` on and above the diagonal, mirrored below it.
pub fn first_piola(state: &DeformationState, p: &ElasticParams) -> Mat3 {
    let a = psi_hat_gradient(&state.r, p);
    let b = a * state.r.transpose();
    let mut k = b;
    for i in 0..3 {
        for j in 0..i {
            k[(i, j)] = b[(j, i)];
        }
    }
    state.q * k * upper_inverse(&state.r).transpose()
}

/// Cauchy stress `(1/det F) P Fᵀ`.
pub fn cauchy_stress(state: &DeformationState, p: &ElasticParams) -> Mat3 {
    let det = state.r[(0, 0)] * state.r[(1, 1)] * state.r[(2, 2)];
    first_piola(state, p) * state.f.transpose() / det
}

fn upper_inverse(r: &Mat3) -> Mat3 {
    let (a, b, c) = (r[(0, 0)], r[(0, 1)], r[(0, 2)]);
    let (d, e) = (r[(1, 1)], r[(1, 2)]);
    let f = r[(2, 2)];
    #[rustfmt::skip]
    let inv = Mat3::new(
        1.0 / a, -b / (a * d), (b * e - c * d) / (a * d * f),
        0.0,     1.0 / d,      -e / (d * f),
        0.0,     0.0,          1.0 / f,
    );
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;

    fn state(f: Mat3) -> DeformationState {
        qr_decompose(&f).unwrap()
    }

    /// Central differences of psi(F) entry by entry.
    fn fd_piola(f: &Mat3, p: &ElasticParams, h: Real) -> Mat3 {
        let mut out = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut fp = *f;
                fp[(i, j)] += h;
                let mut fm = *f;
                fm[(i, j)] -= h;
                out[(i, j)] =
                    (psi_total(&state(fp), p) - psi_total(&state(fm), p)) / (2.0 * h);
            }
        }
        out
    }

    fn arb_rotation() -> impl Strategy<Value = Mat3> {
        (prop::array::uniform3(-1.0..1.0f64), -3.2..3.2f64).prop_filter_map(
            "axis",
            |(axis, angle)| {
                let axis = Vec3::from(axis);
                (axis.norm() > 1e-3).then(|| {
                    *Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).matrix()
                })
            },
        )
    }

    fn arb_upper() -> impl Strategy<Value = Mat3> {
        (
            prop::array::uniform3(0.5..1.5f64),
            prop::array::uniform3(-0.4..0.4f64),
        )
            .prop_map(|(d, o)| Mat3::new(d[0], o[0], o[1], 0.0, d[1], o[2], 0.0, 0.0, d[2]))
    }

    #[test]
    fn deformation_gradient_examples() {
        let d = Mat3::new(1.0, 0.2, 0.0, 0.0, 0.9, 0.1, 0.3, 0.0, 1.0);
        let d_inv = d.try_inverse().unwrap();
        assert_abs_diff_eq!(deformation_gradient(&d, &d_inv), Mat3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            deformation_gradient(&(d * 2.0), &d_inv),
            Mat3::identity() * 2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn qr_of_diagonal_is_trivial() {
        let s = state(Mat3::identity());
        assert_eq!(s.q, Mat3::identity());
        assert_eq!(s.r, Mat3::identity());
        let s = state(Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0)));
        assert_eq!(s.q, Mat3::identity());
        assert_eq!(s.r, Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0)));
    }

    #[test]
    fn qr_rejects_inverted_and_singular() {
        let inverted = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            qr_decompose(&inverted),
            Err(ConstitutiveError::Inverted { index: 2, .. })
        ));
        let singular = Mat3::new(1.0, 2.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            qr_decompose(&singular),
            Err(ConstitutiveError::Inverted { index: 1, .. })
        ));
        let mut nan = Mat3::identity();
        nan[(0, 1)] = Real::NAN;
        assert_eq!(qr_decompose(&nan), Err(ConstitutiveError::NonFinite));
    }

    #[test]
    fn component_energies() {
        assert_eq!(psi_normal(1.0, 500.0), 0.0);
        assert_eq!(psi_normal(1.5, 500.0), 0.0);
        assert_abs_diff_eq!(psi_normal(0.5, 500.0), 500.0 / 3.0 * 0.125, epsilon = 1e-12);
        assert_abs_diff_eq!(psi_normal(0.5, 500.0), 20.833_333_333_333_33, epsilon = 1e-10);

        assert_eq!(psi_shear(0.0, 0.0, 500.0), 0.0);
        assert_abs_diff_eq!(psi_shear(0.1, 0.0, 500.0), 2.5, epsilon = 1e-12);
        assert_eq!(psi_shear(0.3, -0.2, 7.0), psi_shear(-0.2, 0.3, 7.0));

        assert_eq!(psi_inplane(1.0, 0.0, 1.0, 100.0, 0.3), 0.0);
        let expected = 100.0 / 2.6 * 0.01 + 30.0 / (2.6 * 0.4) * 0.01;
        assert_abs_diff_eq!(psi_inplane(1.1, 0.0, 1.0, 100.0, 0.3), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(psi_inplane(1.1, 0.0, 1.0, 100.0, 0.3), 0.673_077, epsilon = 1e-6);
    }

    #[test]
    fn singular_values_match_svd() {
        for (a, b, d) in [(1.1, 0.0, 1.0), (0.7, 0.4, 1.3), (2.0, -1.5, 0.2)] {
            let m = nalgebra::Matrix2::new(a, b, 0.0, d);
            let sv = m.singular_values();
            let (s1, s2) = inplane_singular_values(a, b, d);
            assert_abs_diff_eq!(s1, sv.max(), epsilon = 1e-12);
            assert_abs_diff_eq!(s2, sv.min(), epsilon = 1e-12);
        }
    }

    #[test]
    fn inplane_is_invariant_to_block_rotation() {
        // rotate the block, then re-triangularize it with a 2D QR
        let block = nalgebra::Matrix2::<Real>::new(1.2, 0.3, 0.0, 0.8);
        let rot = nalgebra::Rotation2::new(0.7);
        let qr = (rot.matrix() * block).qr();
        let r = qr.r();
        let sign = nalgebra::Matrix2::from_diagonal(&nalgebra::Vector2::new(
            r[(0, 0)].signum(),
            r[(1, 1)].signum(),
        ));
        let r = sign * r;
        let p = ElasticParams::default();
        assert_abs_diff_eq!(
            psi_inplane(r[(0, 0)], r[(0, 1)], r[(1, 1)], p.youngs, p.poisson),
            psi_inplane(1.2, 0.3, 0.8, p.youngs, p.poisson),
            epsilon = 1e-12
        );
    }

    #[test]
    fn total_energy_examples() {
        let p = ElasticParams::default();
        assert_eq!(psi_total(&state(Mat3::identity()), &p), 0.0);
        let rot = *Rotation3::from_euler_angles(0.3, -1.1, 2.0).matrix();
        assert!(psi_total(&state(rot), &p).abs() < 1e-10);
        let squashed = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 0.5));
        assert_abs_diff_eq!(psi_total(&state(squashed), &p), 20.833_333_333_333_33, epsilon = 1e-10);
    }

    #[test]
    fn piola_examples() {
        let p = ElasticParams::default();
        assert!(first_piola(&state(Mat3::identity()), &p).abs().max() < 1e-10);
        let squashed = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 0.5));
        let mut expected = Mat3::zeros();
        expected[(2, 2)] = -125.0;
        assert_abs_diff_eq!(first_piola(&state(squashed), &p), expected, epsilon = 1e-10);
    }

    #[test]
    fn cauchy_vanishes_at_rest() {
        let p = ElasticParams::default();
        assert!(cauchy_stress(&state(Mat3::identity()), &p).abs().max() < 1e-9);
        let rot = *Rotation3::from_euler_angles(1.0, 0.2, -0.4).matrix();
        assert!(cauchy_stress(&state(rot), &p).abs().max() < 1e-9);
    }

    #[test]
    fn normal_energy_is_c1_at_unit_stretch() {
        let kappa = 500.0;
        let h = 1e-6;
        assert!(psi_normal(1.0 - h, kappa) < 1e-15);
        let mut r = Mat3::identity();
        for r33 in [1.0 - h, 1.0, 1.0 + h] {
            r[(2, 2)] = r33;
            let g = psi_hat_gradient(&r, &ElasticParams::default());
            assert!(g[(2, 2)].abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = ElasticParams::default();
        assert!(p.validate().is_ok());
        p.poisson = 0.5;
        assert!(p.validate().is_err());
        p = ElasticParams { youngs: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
        p = ElasticParams { shear: -1.0, ..Default::default() };
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn qr_reconstructs(rot in arb_rotation(), r0 in arb_upper()) {
            let f = rot * r0;
            let s = state(f);
            prop_assert!((s.q * s.r - f).abs().max() < 1e-9);
            prop_assert!((s.q.transpose() * s.q - Mat3::identity()).abs().max() < 1e-9);
            prop_assert!((s.q.determinant() - 1.0).abs() < 1e-9);
            prop_assert!((s.r - r0).abs().max() < 1e-8);
        }

        #[test]
        fn piola_matches_finite_differences(rot in arb_rotation(), r0 in arb_upper()) {
            let p = ElasticParams::default();
            let f = rot * r0;
            let analytic = first_piola(&state(f), &p);
            let numeric = fd_piola(&f, &p, 1e-6);
            let err = (analytic - numeric).norm() / numeric.norm().max(1e-8);
            prop_assert!(err < 1e-4, "relative error {err}");
        }

        #[test]
        fn energy_is_rotation_invariant(rot in arb_rotation(), other in arb_rotation(), r0 in arb_upper()) {
            let p = ElasticParams::default();
            let f = other * r0;
            let a = psi_total(&state(f), &p);
            let b = psi_total(&state(rot * f), &p);
            prop_assert!((a - b).abs() < 1e-8 * a.max(1.0));
            prop_assert!(a >= 0.0);
        }

        #[test]
        fn cauchy_composes_from_piola(rot in arb_rotation(), r0 in arb_upper()) {
            let p = ElasticParams::default();
            let s = state(rot * r0);
            let piola = first_piola(&s, &p);
            let det = s.f.determinant();
            let mut expected = Mat3::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        expected[(i, j)] += piola[(i, k)] * s.f[(j, k)] / det;
                    }
                }
            }
            prop_assert!((cauchy_stress(&s, &p) - expected).abs().max() < 1e-9 * expected.norm().max(1.0));
        }
    }
}
