use nalgebra::{Matrix3, Rotation3, Unit};

use super::{UnitVector3, Vector3};
use crate::error::{Error, Result};

/// Result of [`rotation_from_normals`].
#[derive(Debug, Clone, Copy)]
pub struct RotationEstimate {
    pub rotation: Rotation3<f64>,
    /// True when the input directions were mutually parallel (or a single
    /// pair), leaving rotation about that axis unconstrained. The returned
    /// rotation is then the minimal one taking the mean data direction onto
    /// the mean scene direction.
    pub rank_deficient: bool,
}

/// Singular values below this fraction of the largest are treated as zero
/// when deciding whether the normal sets span more than one direction.
const RANK_TOL: f64 = 1e-9;

/// Least-squares rotation taking each `data[k]` onto `scene[k]`.
///
/// Orthogonal Procrustes on the cross-covariance `B = Σ sₖ·dₖᵀ`: SVD
/// `B = UΣVᵀ`, `R = UVᵀ`, with the last column of `U` flipped when the
/// product would be a reflection. Lists are paired by index.
pub fn rotation_from_normals(
    data: &[UnitVector3],
    scene: &[UnitVector3],
) -> Result<RotationEstimate> {
    if data.len() != scene.len() {
        return Err(Error::LengthMismatch {
            left: data.len(),
            right: scene.len(),
        });
    }
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }

    let mut cross = Matrix3::<f64>::zeros();
    for (d, s) in data.iter().zip(scene) {
        cross += s.into_inner() * d.into_inner().transpose();
    }
    let svd = cross.svd(true, true);
    let sv = svd.singular_values;
    // Unit inputs guarantee sv[0] ≥ 1/√3 per pair, so the ratio is safe.
    if sv[1] < RANK_TOL * sv[0] {
        return Ok(RotationEstimate {
            rotation: minimal_rotation(data, scene),
            rank_deficient: true,
        });
    }

    let mut u = svd.u.expect("svd of 3x3 always yields u");
    let v_t = svd.v_t.expect("svd of 3x3 always yields v_t");
    if (u * v_t).determinant() < 0.0 {
        u.column_mut(2).neg_mut();
    }
    Ok(RotationEstimate {
        rotation: Rotation3::from_matrix_unchecked(u * v_t),
        rank_deficient: false,
    })
}

/// All data directions are parallel: rotate their mean onto the scene mean
/// along the shortest arc. Antiparallel means fall back to a half-turn about
/// any perpendicular axis.
fn minimal_rotation(data: &[UnitVector3], scene: &[UnitVector3]) -> Rotation3<f64> {
    let mean_of = |list: &[UnitVector3]| -> Vector3 {
        let mut acc = Vector3::zeros();
        for v in list {
            acc += v.into_inner();
        }
        if acc.norm() < 1e-12 {
            list[0].into_inner()
        } else {
            acc
        }
    };
    let d = mean_of(data);
    let s = mean_of(scene);
    match Rotation3::rotation_between(&d, &s) {
        Some(rot) => rot,
        None => {
            let axis = perpendicular_to(&d);
            Rotation3::from_axis_angle(&axis, std::f64::consts::PI)
        }
    }
}

fn perpendicular_to(v: &Vector3) -> UnitVector3 {
    let trial = if v.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    Unit::new_normalize(v.cross(&trial))
}
