//! Rotation matrices and the handful of SO(3) operations the pipeline needs.
//!
//! Every orientation in the crate (sensor readings, calibration offsets, joint
//! rotations, network outputs after projection) is a [`Rotation`]. The body
//! frame is y-up with the subject facing +z.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Unit, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Per-entry tolerance used when validating orthonormality and determinant.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// Smallest singular value accepted by [`project_to_rotation`].
pub const DEGENERATE_SINGULAR_VALUE: f64 = 1e-9;

pub type Vec3 = Vector3<f64>;

/// A 3×3 orthonormal matrix with determinant +1.
#[derive(Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl fmt::Debug for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Rotation")
            .field(&self.to_row_major())
            .finish()
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validates `m` against the rotation invariants at [`ROTATION_TOLERANCE`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if !is_rotation(&m, ROTATION_TOLERANCE) {
            return Err(Error::invalid("matrix is not a proper rotation"));
        }
        Ok(Rotation(m))
    }

    /// Wraps `m` without checking. Callers must guarantee the invariants.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    pub fn from_row_major(v: &[f64; 9]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_row_slice(v))
    }

    /// Rotation by `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        if axis.norm() == 0.0 || angle == 0.0 {
            return Self::identity();
        }
        let axis = Unit::new_normalize(axis);
        Rotation(*nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix())
    }

    /// Exponential map of an axis-angle vector.
    pub fn from_scaled_axis(v: Vec3) -> Self {
        Rotation(*nalgebra::Rotation3::from_scaled_axis(v).matrix())
    }

    pub fn about_x(angle: f64) -> Self {
        Self::from_axis_angle(Vec3::x(), angle)
    }

    /// Rotation about the vertical axis.
    pub fn about_y(angle: f64) -> Self {
        Self::from_axis_angle(Vec3::y(), angle)
    }

    pub fn about_z(angle: f64) -> Self {
        Self::from_axis_angle(Vec3::z(), angle)
    }

    /// Uniformly distributed (Haar) random rotation.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let q = nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]);
        let q = nalgebra::UnitQuaternion::from_quaternion(q);
        Rotation(*q.to_rotation_matrix().matrix())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    /// Geodesic distance in radians, in `[0, π]`.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        // atan2 keeps precision near zero, where acos of the trace does not.
        let r = self.0.transpose() * other.0;
        let s = 0.5
            * ((r[(2, 1)] - r[(1, 2)]).powi(2)
                + (r[(0, 2)] - r[(2, 0)]).powi(2)
                + (r[(1, 0)] - r[(0, 1)]).powi(2))
            .sqrt();
        s.atan2((r.trace() - 1.0) / 2.0)
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Rotation) -> f64 {
        (self.0 - other.0).abs().max()
    }

    /// Heading angle about +y: the direction of the rotated forward axis (+z)
    /// projected onto the horizontal plane.
    pub fn yaw(&self) -> f64 {
        let forward = self.0 * Vec3::z();
        forward.x.atan2(forward.z)
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;

    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;

    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Checks mᵀm = I per entry and det(m) = +1 at `tol`.
pub fn is_rotation(m: &Matrix3<f64>, tol: f64) -> bool {
    if m.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let gram = m.transpose() * m - Matrix3::identity();
    gram.abs().max() <= tol && (m.determinant() - 1.0).abs() <= tol
}

/// Nearest proper rotation to `m` in Frobenius norm.
///
/// Computes the polar factor from the SVD `m = U Σ Vᵀ` and flips the
/// direction of the smallest singular value when `det(U Vᵀ) < 0`.
pub fn project_to_rotation(m: &Matrix3<f64>) -> Result<Rotation> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateInput("non-finite matrix entry".into()));
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateInput("SVD failed to converge".into())),
    };
    let smallest = svd.singular_values.min();
    if smallest <= DEGENERATE_SINGULAR_VALUE {
        return Err(Error::DegenerateInput(format!(
            "rank-deficient matrix (smallest singular value {smallest:e})"
        )));
    }
    // nalgebra does not sort singular values, so locate the smallest one.
    let mut fix = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        let idx = svd.singular_values.imin();
        fix[(idx, idx)] = -1.0;
    }
    Ok(Rotation(u * fix * v_t))
}
