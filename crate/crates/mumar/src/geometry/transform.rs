use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Serialize};

use super::{Point3, UnitVector3, Vector3};
use crate::error::{Error, Result};
use crate::geometry::{PlaneModel, PointCloud};

/// How far from a perfect rotation a matrix may drift before constructors
/// reject it.
pub const ORTHONORMALITY_TOL: f64 = 1e-9;

/// A proper rigid motion: rotation followed by translation, `p ↦ R·p + t`.
///
/// The rotation part is orthonormal with determinant +1 within
/// [`ORTHONORMALITY_TOL`]; the checked constructors enforce it and the solver
/// paths produce it by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_parts(rotation: Rotation3<f64>, translation: Vector3) -> Self {
        let t = RigidTransform {
            rotation,
            translation,
        };
        debug_assert!(
            t.orthonormality_error() <= ORTHONORMALITY_TOL,
            "rotation part drifted from SO(3): error {}",
            t.orthonormality_error()
        );
        t
    }

    /// Builds from an arbitrary 3×3 matrix, rejecting anything that is not a
    /// rotation within [`ORTHONORMALITY_TOL`].
    pub fn from_matrix(rotation: &Matrix3<f64>, translation: Vector3) -> Result<Self> {
        let candidate = RigidTransform {
            rotation: Rotation3::from_matrix_unchecked(*rotation),
            translation,
        };
        let err = candidate.orthonormality_error();
        if err > ORTHONORMALITY_TOL {
            return Err(Error::InvalidTransform(format!(
                "matrix is not a rotation (deviation {err:.3e}, det {:.6})",
                rotation.determinant()
            )));
        }
        Ok(candidate)
    }

    /// Largest absolute entry of `RᵀR − I` plus the determinant's deviation
    /// from +1; zero for an exact rotation.
    pub fn orthonormality_error(&self) -> f64 {
        let m = self.rotation.matrix();
        let gram = m.transpose() * m - Matrix3::identity();
        let gram_err = gram.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        gram_err.max((m.determinant() - 1.0).abs())
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3) -> Vector3 {
        self.rotation * v
    }

    pub fn transform_unit(&self, v: &UnitVector3) -> UnitVector3 {
        UnitVector3::new_normalize(self.rotation * v.into_inner())
    }

    pub fn transform_plane(&self, plane: &PlaneModel) -> PlaneModel {
        PlaneModel::new(
            self.transform_unit(&plane.normal),
            self.transform_point(&plane.centroid),
        )
    }

    /// Applies the motion to every point (and normal, when present) of a
    /// cloud, leaving labels untouched.
    pub fn transform_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            points: cloud.points.iter().map(|p| self.transform_point(p)).collect(),
            normals: cloud
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| self.transform_unit(n)).collect()),
            labels: cloud.labels.clone(),
        }
    }

    /// Composition `self ∘ other`: applying the result equals applying
    /// `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let inv_rot = self.rotation.inverse();
        RigidTransform {
            rotation: inv_rot,
            translation: -(inv_rot * self.translation),
        }
    }

    /// Magnitude of the rotation part in degrees.
    pub fn rotation_angle_deg(&self) -> f64 {
        super::rotation_magnitude_deg(&self.rotation)
    }

    /// Row-major 4×4 homogeneous form, bottom row `0 0 0 1`.
    pub fn to_rows(&self) -> [[f64; 4]; 4] {
        let m = self.rotation.matrix();
        let t = self.translation;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)], t.x],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)], t.y],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    pub fn from_rows(rows: &[[f64; 4]; 4]) -> Result<Self> {
        let bottom = rows[3];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::InvalidTransform(format!(
                "bottom row must be 0 0 0 1, got {bottom:?}"
            )));
        }
        let rotation = Matrix3::new(
            rows[0][0], rows[0][1], rows[0][2], //
            rows[1][0], rows[1][1], rows[1][2], //
            rows[2][0], rows[2][1], rows[2][2],
        );
        let translation = Vector3::new(rows[0][3], rows[1][3], rows[2][3]);
        Self::from_matrix(&rotation, translation)
    }

    /// Snaps the rotation part to the nearest element of SO(3) via SVD. Cheap
    /// insurance for long chains of composed increments.
    pub fn reorthonormalized(&self) -> Self {
        let svd = self.rotation.matrix().svd(true, true);
        let u = svd.u.expect("svd of 3x3 always yields u");
        let v_t = svd.v_t.expect("svd of 3x3 always yields v_t");
        let mut m = u * v_t;
        if m.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            m = u * v_t;
        }
        RigidTransform {
            rotation: Rotation3::from_matrix_unchecked(m),
            translation: self.translation,
        }
    }
}
