use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance on RᵀR = I and det R = 1.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Rigid SE(3) transform. Maps points from a source frame into a target frame
/// as `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Builds a pose after checking that `rotation` is a proper rotation.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation(&rotation)?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Geometry("translation is not finite".into()));
        }
        Ok(Self { rotation, translation })
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self { rotation: Matrix3::identity(), translation: t }
    }

    /// Rotation about a unit axis (right-handed), followed by a translation.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, t: Vector3<f64>) -> Self {
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        Self { rotation: *rot.matrix(), translation: t }
    }

    /// Yaw about +z followed by a translation. Common for ground vehicles.
    pub fn from_yaw(yaw: f64, t: Vector3<f64>) -> Self {
        Self::from_axis_angle(Vector3::z(), yaw, t)
    }

    /// Camera-to-body pose for a camera at `t` looking along body +x, with the
    /// optical frame convention x right, y down, z forward.
    pub fn forward_camera(t: Vector3<f64>) -> Self {
        #[rustfmt::skip]
        let rotation = Matrix3::new(
            0.0, 0.0, 1.0,
            -1.0, 0.0, 0.0,
            0.0, -1.0, 0.0,
        );
        Self { rotation, translation: t }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose { rotation: rt, translation: -(rt * self.translation) }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn transform_points(&self, points: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        points.iter().map(|p| self.transform_point(p)).collect()
    }

    /// Interpolates between two poses: linear in translation, geodesic
    /// (constant angular rate) in rotation. `s = 0` gives `a`, `s = 1` gives `b`.
    pub fn interpolate(a: &Pose, b: &Pose, s: f64) -> Result<Pose> {
        let qa = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(a.rotation));
        let qb = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(b.rotation));
        // Antipodal quaternions have no unique geodesic; fall back to `a`'s rotation
        // only in the degenerate 180° case.
        let q = qa.try_slerp(&qb, s, 1e-12).unwrap_or(if s < 0.5 { qa } else { qb });
        let rotation = *q.to_rotation_matrix().matrix();
        check_rotation(&rotation).map_err(|e| Error::Internal(format!("pose interpolation produced {e}")))?;
        Ok(Pose { rotation, translation: a.translation.lerp(&b.translation, s) })
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Row-major 4×4 homogeneous matrix.
    pub fn to_rows(&self) -> [[f64; 4]; 4] {
        let m = self.to_matrix();
        std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
    }

    pub fn from_rows(rows: &[[f64; 4]; 4]) -> Result<Pose> {
        let last = rows[3];
        if last != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::Geometry(format!("bottom row of a rigid transform must be [0, 0, 0, 1], got {last:?}")));
        }
        let rotation = Matrix3::from_fn(|r, c| rows[r][c]);
        let translation = Vector3::new(rows[0][3], rows[1][3], rows[2][3]);
        Pose::new(rotation, translation)
    }

    /// Largest elementwise difference between the homogeneous matrices.
    pub fn max_abs_diff(&self, other: &Pose) -> f64 {
        (self.to_matrix() - other.to_matrix()).abs().max()
    }
}

fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::Geometry("rotation is not finite".into()));
    }
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    if ortho > ORTHONORMAL_TOL {
        return Err(Error::Geometry(format!("rotation is not orthonormal (max |RᵀR - I| = {ortho:.3e})")));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ORTHONORMAL_TOL {
        return Err(Error::Geometry(format!("rotation determinant is {det}, expected +1")));
    }
    Ok(())
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 4]; 4]>::deserialize(d)?;
        Pose::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}
