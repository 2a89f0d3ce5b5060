//! Twist coordinates and the SE(3) exponential map.
//!
//! Poses are stored as the 6-vector `xi = [v, w]` (translational part first)
//! together with the cached realization `(R, t)` so per-pixel warps never
//! re-evaluate the exponential.

use nalgebra::{Matrix3, Vector3, Vector6};
#[allow(unused_imports)]
use num_traits::Float;

/// Below this rotation angle the closed-form Rodrigues coefficients switch
/// to their series expansions.
const SMALL_ANGLE: f64 = 1e-8;

/// A rigid body motion parameterized by se(3) twist coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistPose {
    xi: Vector6<f64>,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rodrigues coefficients (a, b, c) with
/// `R = I + a*W + b*W^2` and `V = I + c*W + ((1 - a) / th^2)*W^2`.
fn rodrigues(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        // sin(th)/th, (1-cos th)/th^2, (th - sin th)/th^3
        (1.0 - theta * theta / 6.0, 0.5 - theta * theta / 24.0, 1.0 / 6.0)
    } else {
        let t2 = theta * theta;
        (
            theta.sin() / theta,
            (1.0 - theta.cos()) / t2,
            (theta - theta.sin()) / (t2 * theta),
        )
    }
}

impl TwistPose {
    pub fn identity() -> Self {
        Self {
            xi: Vector6::zeros(),
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Realizes a twist `[v, w]` through the exponential map.
    pub fn from_twist(xi: Vector6<f64>) -> Self {
        let v = Vector3::new(xi[0], xi[1], xi[2]);
        let w = Vector3::new(xi[3], xi[4], xi[5]);
        let theta = w.norm();
        let wx = skew(&w);
        let wx2 = wx * wx;
        let (a, b, c) = rodrigues(theta);
        let rotation = Matrix3::identity() + wx * a + wx2 * b;
        let vmat = Matrix3::identity() + wx * b + wx2 * c;
        Self {
            xi,
            rotation,
            translation: vmat * v,
        }
    }

    /// Recovers twist coordinates from a rotation and translation (the
    /// logarithm map) and caches the given realization.
    pub fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let w = log_so3(&rotation);
        let theta = w.norm();
        let wx = skew(&w);
        let wx2 = wx * wx;
        let (_a, b, c) = rodrigues(theta);
        let vmat = Matrix3::identity() + wx * b + wx2 * c;
        let v = vmat
            .try_inverse()
            .map(|vi| vi * translation)
            .unwrap_or(translation);
        let xi = Vector6::new(v.x, v.y, v.z, w.x, w.y, w.z);
        Self {
            xi,
            rotation,
            translation,
        }
    }

    #[inline]
    pub fn twist(&self) -> Vector6<f64> {
        self.xi
    }

    #[inline]
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    #[inline]
    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn is_identity(&self) -> bool {
        self.xi == Vector6::zeros()
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &TwistPose) -> TwistPose {
        TwistPose::from_parts(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> TwistPose {
        let rt = self.rotation.transpose();
        TwistPose::from_parts(rt, -(rt * self.translation))
    }

    /// Applies the rigid motion to a 3-point.
    #[inline]
    pub fn apply(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }
}

/// SO(3) logarithm; handles the small-angle and near-pi branches.
fn log_so3(r: &Matrix3<f64>) -> Vector3<f64> {
    let trace = r[(0, 0)] + r[(1, 1)] + r[(2, 2)];
    let cos_theta = ((trace - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    let axis_raw = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    if theta < SMALL_ANGLE {
        return axis_raw * 0.5;
    }
    if core::f64::consts::PI - theta < 1e-6 {
        // Antisymmetric part vanishes; take the axis from the diagonal of
        // R = I + (1 - cos)* (aa^T - I) + ...
        let mut k = 0;
        for i in 1..3 {
            if r[(i, i)] > r[(k, k)] {
                k = i;
            }
        }
        let mut axis = Vector3::zeros();
        axis[k] = ((r[(k, k)] + 1.0) * 0.5).max(0.0).sqrt();
        for i in 0..3 {
            if i != k && axis[k].abs() > 0.0 {
                axis[i] = (r[(i, k)] + r[(k, i)]) * 0.25 / axis[k];
            }
        }
        // Resolve the sign with the antisymmetric remainder.
        if axis.dot(&axis_raw) < 0.0 {
            axis = -axis;
        }
        return axis.normalize() * theta;
    }
    axis_raw * (theta / (2.0 * theta.sin()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn exp_of_zero_is_identity() {
        let p = TwistPose::from_twist(Vector6::zeros());
        assert_eq!(p.rotation, Matrix3::identity());
        assert_eq!(p.translation, Vector3::zeros());
        assert!(p.is_identity());
    }

    prop_compose! {
        fn arb_twist()(v in prop::array::uniform6(-1.0f64..1.0)) -> Vector6<f64> {
            Vector6::from_row_slice(&v)
        }
    }

    proptest! {
        #[test]
        fn rotation_is_orthonormal(xi in arb_twist()) {
            let p = TwistPose::from_twist(xi);
            let rtr = p.rotation().transpose() * p.rotation();
            for i in 0..3 {
                for j in 0..3 {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((rtr[(i, j)] - expected).abs() < 1e-12);
                }
            }
            prop_assert!((p.rotation().determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn exp_log_roundtrip(xi in arb_twist()) {
            let p = TwistPose::from_twist(xi);
            let q = TwistPose::from_parts(*p.rotation(), *p.translation());
            let r = TwistPose::from_twist(q.twist());
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((r.rotation()[(i, j)] - p.rotation()[(i, j)]).abs() < 1e-10);
                }
                prop_assert!((r.translation()[i] - p.translation()[i]).abs() < 1e-10);
            }
        }

        #[test]
        fn inverse_cancels(xi in arb_twist()) {
            let p = TwistPose::from_twist(xi);
            let e = p.compose(&p.inverse());
            for i in 0..3 {
                for j in 0..3 {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((e.rotation()[(i, j)] - expected).abs() < 1e-10);
                }
                prop_assert!(e.translation()[i].abs() < 1e-10);
            }
        }

        #[test]
        fn compose_matches_matrix_product(a in arb_twist(), b in arb_twist()) {
            let pa = TwistPose::from_twist(a);
            let pb = TwistPose::from_twist(b);
            let pc = pb.compose(&pa);
            let x = Vector3::new(0.3, -0.7, 2.1);
            let via_two = pb.apply(&pa.apply(&x));
            let via_one = pc.apply(&x);
            for i in 0..3 {
                prop_assert!((via_two[i] - via_one[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pure_translation() {
        let p = TwistPose::from_twist(Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0));
        let q = p.apply(&Vector3::new(0.0, 0.0, 2.0));
        assert_relative_eq!(q, Vector3::new(0.0, 0.0, 3.0), epsilon = 1e-15);
    }

    #[test]
    fn log_near_pi() {
        let w = Vector3::new(0.6, -0.2, 0.3).normalize() * (core::f64::consts::PI - 1e-9);
        let xi = Vector6::new(0.1, 0.2, 0.3, w.x, w.y, w.z);
        let p = TwistPose::from_twist(xi);
        let q = TwistPose::from_parts(*p.rotation(), *p.translation());
        let r = TwistPose::from_twist(q.twist());
        for i in 0..3 {
            for j in 0..3 {
                assert!((r.rotation()[(i, j)] - p.rotation()[(i, j)]).abs() < 1e-6);
            }
        }
    }
}
