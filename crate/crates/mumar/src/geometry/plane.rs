use nalgebra::{Matrix3, SymmetricEigen, Unit};
use serde::{Deserialize, Serialize};

use super::{angle_between_deg, Point3, UnitVector3, Vector3};
use crate::error::{Error, Result};

/// An oriented plane, stored as unit normal plus the centroid of the points
/// that produced it. Keeping the centroid (rather than a bare offset) lets
/// registration reason about *where* on the infinite plane a face sits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneModel {
    pub normal: UnitVector3,
    pub centroid: Point3,
}

impl PlaneModel {
    pub fn new(normal: UnitVector3, centroid: Point3) -> Self {
        PlaneModel { normal, centroid }
    }

    /// Signed distance, positive on the side the normal points to.
    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal.dot(&(p - self.centroid))
    }

    pub fn distance(&self, p: &Point3) -> f64 {
        self.signed_distance(p).abs()
    }

    /// Orthogonal projection of `p` onto the plane: the closest plane point.
    pub fn project(&self, p: &Point3) -> Point3 {
        p - self.normal.into_inner() * self.signed_distance(p)
    }

    /// Angle between the two normals in degrees (orientation-sensitive).
    pub fn angle_to_deg(&self, other: &PlaneModel) -> f64 {
        angle_between_deg(&self.normal, &other.normal)
    }

    pub fn flipped(&self) -> Self {
        PlaneModel {
            normal: Unit::new_unchecked(-self.normal.into_inner()),
            centroid: self.centroid,
        }
    }

    /// Flips the normal, if needed, so it points along `reference`.
    pub fn oriented_along(&self, reference: &Vector3) -> Self {
        if self.normal.dot(reference) < 0.0 {
            self.flipped()
        } else {
            *self
        }
    }
}

/// Running least-squares plane fit.
///
/// Keeps the mean and the centered second-moment matrix with Welford-style
/// updates, so points can be added one at a time (the detector grows planes
/// incrementally) without the cancellation a naive `Σppᵀ − n·µµᵀ` suffers far
/// from the origin.
#[derive(Debug, Clone, Default)]
pub struct PlaneAccumulator {
    n: usize,
    mean: Vector3,
    comoment: Matrix3<f64>,
}

/// Second-smallest eigenvalue below this fraction of the largest means the
/// points have no unique normal direction (coincident or collinear set).
const DEGENERACY_RATIO: f64 = 100.0 * f64::EPSILON;

impl PlaneAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, p: &Point3) {
        self.n += 1;
        let delta = p.coords - self.mean;
        self.mean += delta / self.n as f64;
        let delta2 = p.coords - self.mean;
        self.comoment += delta * delta2.transpose();
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> Point3 {
        Point3::from(self.mean)
    }

    /// Least-squares plane through the accumulated points: centroid plus the
    /// eigenvector of the smallest covariance eigenvalue. The normal's sign is
    /// whatever the eigensolver returns; callers that care orient it
    /// afterwards.
    pub fn fit(&self) -> Result<PlaneModel> {
        if self.n < 3 {
            return Err(Error::TooFewPoints {
                needed: 3,
                got: self.n,
            });
        }
        let cov = self.comoment / self.n as f64;
        let eigen = SymmetricEigen::new(cov);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
        let [lo, mid, hi] = order;
        let l_mid = eigen.eigenvalues[mid].max(0.0);
        let l_hi = eigen.eigenvalues[hi].max(0.0);
        if l_mid <= l_hi * DEGENERACY_RATIO {
            return Err(Error::DegenerateSet);
        }
        let normal = Unit::new_normalize(eigen.eigenvectors.column(lo).into_owned());
        Ok(PlaneModel::new(normal, self.mean()))
    }
}

/// Least-squares plane through a point set. Needs at least three
/// non-collinear points.
pub fn fit_plane(points: &[Point3]) -> Result<PlaneModel> {
    let mut acc = PlaneAccumulator::new();
    for p in points {
        acc.add(p);
    }
    acc.fit()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidTransform;
    use approx::assert_abs_diff_eq;
    use nalgebra::Rotation3;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Normal;

    fn assert_same_plane(a: &PlaneModel, b: &PlaneModel, angle_tol_deg: f64, dist_tol: f64) {
        let angle = a.angle_to_deg(b).min(180.0 - a.angle_to_deg(b));
        assert!(angle <= angle_tol_deg, "normals differ by {angle}°");
        assert!(a.distance(&b.centroid) <= dist_tol);
    }

    #[test]
    fn exact_fit_through_triangle() {
        let plane = fit_plane(&[
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(1.0, 0.0, 1.0),
            Point3::new(0.0, 1.0, 1.0),
        ])
        .unwrap();
        assert!(plane.normal.z.abs() > 1.0 - 1e-12);
        assert_abs_diff_eq!(plane.centroid.z, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn axis_aligned_square_at_x_2() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Point3> = (0..1000)
            .map(|_| Point3::new(2.0, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let plane = fit_plane(&pts).unwrap();
        assert!(plane.normal.x.abs() > 1.0 - 1e-9);
        assert_abs_diff_eq!(plane.centroid.x, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn noisy_fit_recovers_generator_plane() {
        // Samples of 2x + y - z = 1 with sigma = 0.01 along the true normal.
        let true_normal = Unit::new_normalize(Vector3::new(2.0, 1.0, -1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let pts: Vec<Point3> = (0..2000)
            .map(|_| {
                let y = rng.random_range(-1.0..1.0);
                let z = rng.random_range(-1.0..1.0);
                let x = (1.0 - y + z) / 2.0;
                Point3::new(x, y, z) + true_normal.into_inner() * rng.sample(noise)
            })
            .collect();
        let plane = fit_plane(&pts).unwrap();
        let angle = angle_between_deg(&plane.normal, &true_normal);
        assert!(angle.min(180.0 - angle) < 0.5);
    }

    #[test]
    fn degenerate_sets_are_rejected() {
        let collinear: Vec<Point3> = (0..10)
            .map(|i| Point3::new(i as f64 * 0.5, i as f64, -i as f64 * 0.25))
            .collect();
        assert!(matches!(fit_plane(&collinear), Err(Error::DegenerateSet)));
        let coincident = vec![Point3::new(1.0, 2.0, 3.0); 5];
        assert!(matches!(fit_plane(&coincident), Err(Error::DegenerateSet)));
        assert!(matches!(
            fit_plane(&[Point3::origin(), Point3::new(1.0, 0.0, 0.0)]),
            Err(Error::TooFewPoints { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn fit_is_invariant_to_point_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts: Vec<Point3> = (0..200)
            .map(|_| {
                Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    0.3 + 1e-4 * rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let a = fit_plane(&pts).unwrap();
        pts.shuffle(&mut rng);
        let b = fit_plane(&pts).unwrap();
        assert_same_plane(&a, &b, 1e-7, 1e-10);
    }

    #[test]
    fn fit_commutes_with_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Point3> = (0..300)
            .map(|_| {
                Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    0.02 * rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let t = RigidTransform::from_parts(
            Rotation3::from_euler_angles(0.4, -0.2, 1.1),
            Vector3::new(10.0, -4.0, 2.0),
        );
        let fitted_then_moved = t.transform_plane(&fit_plane(&pts).unwrap());
        let moved: Vec<Point3> = pts.iter().map(|p| t.transform_point(p)).collect();
        let moved_then_fitted = fit_plane(&moved).unwrap();
        assert_same_plane(&fitted_then_moved, &moved_then_fitted, 1e-6, 1e-9);
    }

    #[test]
    fn incremental_fit_matches_batch_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Point3> = (0..50)
            .map(|_| {
                Point3::new(
                    rng.random_range(-1.0..1.0) + 100.0,
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-0.01..0.01),
                )
            })
            .collect();
        let mut acc = PlaneAccumulator::new();
        for p in &pts {
            acc.add(p);
        }
        let inc = acc.fit().unwrap();
        let batch = fit_plane(&pts).unwrap();
        assert_same_plane(&inc, &batch, 1e-9, 1e-12);
        assert_eq!(acc.count(), 50);
    }

    #[test]
    fn projection_is_idempotent_and_closest() {
        let plane = PlaneModel::new(
            Unit::new_normalize(Vector3::new(1.0, 1.0, 1.0)),
            Point3::origin(),
        );
        // Hand-computed: (1,2,3) onto x+y+z=0 is (-1,0,1).
        let q = plane.project(&Point3::new(1.0, 2.0, 3.0));
        assert_abs_diff_eq!(q, Point3::new(-1.0, 0.0, 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(plane.project(&q), q, epsilon = 1e-12);

        // No on-plane point beats the projection.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = Point3::new(0.7, -0.3, 2.1);
        let proj = plane.project(&p);
        let best = (p - proj).norm();
        for _ in 0..1000 {
            let candidate = plane.project(&Point3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            ));
            assert!((p - candidate).norm() + 1e-12 >= best);
        }
    }

    #[test]
    fn signed_distance_signs() {
        let plane = PlaneModel::new(Unit::new_normalize(Vector3::z()), Point3::origin());
        assert_abs_diff_eq!(
            plane.signed_distance(&Point3::new(5.0, 5.0, 2.0)),
            2.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            plane.signed_distance(&Point3::new(0.0, 0.0, -3.0)),
            -3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            plane.flipped().signed_distance(&Point3::new(0.0, 0.0, 2.0)),
            -2.0,
            epsilon = 1e-15
        );
    }
}
