//! Core geometric types: points, unit vectors, planes, rigid transforms, and
//! the small solvers (plane fit, normal-set rotation) the pipeline is built on.

mod cloud;
mod normals;
mod plane;
mod rotation;
mod transform;

pub use cloud::PointCloud;
pub use normals::estimate_normals;
pub use plane::{fit_plane, PlaneAccumulator, PlaneModel};
pub use rotation::{rotation_from_normals, RotationEstimate};
pub use transform::RigidTransform;

/// 3D point in f64, the only precision used in this crate.
pub type Point3 = nalgebra::Point3<f64>;
/// 3D vector in f64.
pub type Vector3 = nalgebra::Vector3<f64>;
/// Unit-norm 3D vector; the constructor normalises, so the norm stays 1 up to
/// floating-point rounding.
pub type UnitVector3 = nalgebra::UnitVector3<f64>;

/// Angle between two unit vectors in degrees, in `[0, 180]`.
///
/// Uses the half-angle form `2·atan2(|u − v|, |u + v|)`, which stays accurate
/// near 0° and 180° where the naive `acos` of a dot product loses digits.
pub fn angle_between_deg(u: &UnitVector3, v: &UnitVector3) -> f64 {
    let diff = (u.into_inner() - v.into_inner()).norm();
    let sum = (u.into_inner() + v.into_inner()).norm();
    2.0 * diff.atan2(sum).to_degrees()
}

/// Angle folded to `[0, 90]`: the angle between undirected lines, used where
/// normal orientation is not trustworthy.
pub fn folded_angle_deg(u: &UnitVector3, v: &UnitVector3) -> f64 {
    let a = angle_between_deg(u, v);
    a.min(180.0 - a)
}

/// Magnitude in degrees of a rotation matrix, via `atan2(‖skew part‖, trace)`.
///
/// The textbook `acos((tr−1)/2)` loses half the significant digits near 0°
/// and silently produces NaN when rounding pushes the trace past 3; this form
/// does neither.
pub fn rotation_magnitude_deg(r: &nalgebra::Rotation3<f64>) -> f64 {
    let m = r.matrix();
    let sin_vec = Vector3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    ) * 0.5;
    let cos = (m.trace() - 1.0) * 0.5;
    sin_vec.norm().atan2(cos).to_degrees()
}

/// Angle in degrees between two rotations (magnitude of `a⁻¹·b`).
pub fn rotation_gap_deg(a: &nalgebra::Rotation3<f64>, b: &nalgebra::Rotation3<f64>) -> f64 {
    rotation_magnitude_deg(&(a.inverse() * b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Unit;

    fn unit(x: f64, y: f64, z: f64) -> UnitVector3 {
        Unit::new_normalize(Vector3::new(x, y, z))
    }

    #[test]
    fn angle_between_axes() {
        assert_abs_diff_eq!(
            angle_between_deg(&unit(1.0, 0.0, 0.0), &unit(0.0, 1.0, 0.0)),
            90.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            angle_between_deg(&unit(1.0, 0.0, 0.0), &unit(1.0, 0.0, 0.0)),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            angle_between_deg(&unit(1.0, 0.0, 0.0), &unit(-1.0, 0.0, 0.0)),
            180.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            angle_between_deg(&unit(1.0, 0.0, 0.0), &unit(1.0, 1.0, 0.0)),
            45.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn angle_between_is_accurate_for_tiny_angles() {
        // 1e-8 rad is far below what acos(dot) can resolve; atan2 keeps it.
        let theta: f64 = 1e-8;
        let u = unit(1.0, 0.0, 0.0);
        let v = unit(theta.cos(), theta.sin(), 0.0);
        assert_abs_diff_eq!(
            angle_between_deg(&u, &v),
            theta.to_degrees(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn folded_angle_ignores_orientation() {
        let u = unit(0.0, 0.0, 1.0);
        let v = unit(0.0, 1.0, 1.0);
        let w = unit(0.0, -1.0, -1.0);
        assert_abs_diff_eq!(folded_angle_deg(&u, &v), 45.0, epsilon = 1e-12);
        assert_abs_diff_eq!(folded_angle_deg(&u, &w), 45.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            folded_angle_deg(&unit(1.0, 0.0, 0.0), &unit(-1.0, 0.0, 0.0)),
            0.0,
            epsilon = 1e-12
        );
    }
}
