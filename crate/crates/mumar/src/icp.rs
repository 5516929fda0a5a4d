//! Point-to-plane ICP.
//!
//! Serves two roles: the stand-alone baseline that registers consecutive
//! object clouds directly, and the fallback inside the multi-view solver
//! when a view's planes leave the rotation under-determined. The variant
//! implemented here rejects a worst fraction of correspondences each
//! iteration and keeps boundary points out of the residual, which otherwise
//! anchor partially-overlapping scans to their rims.

use nalgebra::{Matrix6, Rotation3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, RigidTransform, Vector3};
use crate::spatial::KdTree3;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IcpOptions {
    pub max_iterations: usize,
    /// Fraction of the worst correspondences dropped every iteration.
    pub rejection_fraction: f64,
    /// Stop when the RMS residual (or its change) falls below this.
    pub convergence_delta: f64,
    /// Exclude boundary points from matching on both sides.
    pub use_boundaries: bool,
    /// Neighbourhood size for boundary detection.
    pub boundary_k: usize,
}

impl Default for IcpOptions {
    fn default() -> Self {
        IcpOptions {
            max_iterations: 60,
            rejection_fraction: 0.3,
            convergence_delta: 1e-7,
            use_boundaries: true,
            boundary_k: 12,
        }
    }
}

impl IcpOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.rejection_fraction) {
            return Err(Error::Config(
                "rejection_fraction must lie in [0, 1)".into(),
            ));
        }
        if !(self.convergence_delta > 0.0) {
            return Err(Error::Config("convergence_delta must be positive".into()));
        }
        if self.use_boundaries && self.boundary_k < 3 {
            return Err(Error::Config("boundary_k must be >= 3".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IcpResult {
    pub transform: RigidTransform,
    /// RMS point-to-plane residual per accepted iteration; never increasing.
    pub rms_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Flags points that sit on an open edge of the scanned surface: a point is
/// a boundary when its `k` neighbours, projected into the local tangent
/// plane, leave an angular gap wider than 120°.
pub fn detect_boundaries(cloud: &PointCloud, k: usize) -> Result<Vec<bool>> {
    if k < 3 {
        return Err(Error::InvalidParameter(
            "boundary detection needs k >= 3".into(),
        ));
    }
    if cloud.len() <= k {
        return Err(Error::TooFewPoints {
            needed: k + 1,
            got: cloud.len(),
        });
    }
    const GAP_DEG: f64 = 120.0;
    let tree = KdTree3::build(&cloud.points);
    let mut flags = Vec::with_capacity(cloud.len());
    let mut offsets: Vec<Vector3> = Vec::with_capacity(k);
    for (i, p) in cloud.points.iter().enumerate() {
        offsets.clear();
        let mut acc = crate::geometry::PlaneAccumulator::new();
        acc.add(p);
        for (j, _) in tree.k_nearest(p, k + 1) {
            if j != i {
                offsets.push(cloud.points[j] - p);
                acc.add(&cloud.points[j]);
            }
        }
        let tangent = match acc.fit() {
            Ok(m) => m.normal,
            Err(_) => {
                // A neighbourhood without a tangent plane is edge-like by
                // definition.
                flags.push(true);
                continue;
            }
        };
        // In-plane frame.
        let u = {
            let trial = if tangent.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            tangent.into_inner().cross(&trial).normalize()
        };
        let v = tangent.into_inner().cross(&u);
        let mut angles: Vec<f64> = offsets
            .iter()
            .map(|d| d.dot(&v).atan2(d.dot(&u)))
            .collect();
        angles.sort_by(f64::total_cmp);
        let mut max_gap = 0.0f64;
        for w in angles.windows(2) {
            max_gap = max_gap.max(w[1] - w[0]);
        }
        max_gap = max_gap.max(
            angles[0] + 2.0 * std::f64::consts::PI - angles[angles.len() - 1],
        );
        flags.push(max_gap.to_degrees() > GAP_DEG);
    }
    Ok(flags)
}

/// Registers `data` onto `scene` (which must carry normals) by minimising
/// point-to-plane distances. Returns the transform mapping data points into
/// the scene frame.
///
/// Each iteration matches every usable data point to its nearest scene
/// point, drops the worst `rejection_fraction` by absolute residual, solves
/// the linearised 6-DoF system (pseudo-inverse, so under-determined
/// geometry yields the minimum-norm update instead of an explosion), and
/// re-orthonormalises the accumulated rotation. An iteration that would
/// increase the RMS is rolled back and ends the loop.
pub fn icp_point_to_plane(
    data: &PointCloud,
    scene: &PointCloud,
    options: &IcpOptions,
) -> Result<IcpResult> {
    options.validate()?;
    if data.is_empty() || scene.is_empty() {
        return Err(Error::EmptyInput);
    }
    let scene_normals = scene.normals.as_ref().ok_or(Error::MissingNormals)?;

    let data_boundary = if options.use_boundaries {
        detect_boundaries(data, options.boundary_k)?
    } else {
        vec![false; data.len()]
    };
    let scene_boundary = if options.use_boundaries {
        detect_boundaries(scene, options.boundary_k)?
    } else {
        vec![false; scene.len()]
    };

    let tree = KdTree3::build(&scene.points);
    let mut transform = RigidTransform::identity();
    let mut previous = transform;
    let mut prev_rms: Option<f64> = None;
    let mut rms_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let mut residuals: Vec<(f64, usize, usize)> = Vec::new(); // (|r|, data idx, scene idx)
    for _ in 0..options.max_iterations {
        iterations += 1;

        residuals.clear();
        for (di, d) in data.points.iter().enumerate() {
            if data_boundary[di] {
                continue;
            }
            let p = transform.transform_point(d);
            let (si, _) = tree.nearest(&p);
            if scene_boundary[si] {
                continue;
            }
            let r = scene_normals[si].dot(&(p - scene.points[si]));
            residuals.push((r.abs(), di, si));
        }
        if residuals.is_empty() {
            return Err(Error::NoCorrespondences);
        }
        residuals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let keep = (((1.0 - options.rejection_fraction) * residuals.len() as f64).ceil()
            as usize)
            .max(1);
        residuals.truncate(keep);

        let rms = (residuals.iter().map(|(r, _, _)| r * r).sum::<f64>() / keep as f64).sqrt();
        if let Some(prev) = prev_rms {
            if rms > prev {
                // The last update overshot: undo it and stop here.
                transform = previous;
                converged = true;
                break;
            }
            if (prev - rms).abs() < options.convergence_delta {
                rms_trace.push(rms);
                converged = true;
                break;
            }
        }
        rms_trace.push(rms);
        if rms < options.convergence_delta {
            converged = true;
            break;
        }
        prev_rms = Some(rms);
        previous = transform;

        // Linearised point-to-plane normal equations.
        let mut h = Matrix6::<f64>::zeros();
        let mut g = Vector6::<f64>::zeros();
        for &(_, di, si) in &residuals {
            let p = transform.transform_point(&data.points[di]);
            let n = scene_normals[si].into_inner();
            let r = n.dot(&(p - scene.points[si]));
            let cross = p.coords.cross(&n);
            let a = Vector6::new(cross.x, cross.y, cross.z, n.x, n.y, n.z);
            h += a * a.transpose();
            g += a * r;
        }
        let svd = h.svd(true, true);
        let cutoff = svd.singular_values[0] * 1e-12;
        let x = svd
            .solve(&(-g), cutoff)
            .map_err(|e| Error::InvalidParameter(format!("ICP solve failed: {e}")))?;
        let omega = Vector3::new(x[0], x[1], x[2]);
        let t = Vector3::new(x[3], x[4], x[5]);
        let delta = RigidTransform::from_parts(Rotation3::from_scaled_axis(omega), t);
        transform = delta.compose(&transform).reorthonormalized();
    }

    Ok(IcpResult {
        transform,
        rms_trace,
        converged,
        iterations,
    })
}

#[derive(Debug, Clone)]
pub struct IcpSequenceResult {
    /// Per view, the transform into the first view's frame.
    pub transforms: Vec<RigidTransform>,
    pub converged: bool,
}

/// Chains pairwise ICP along a sequence: every view is registered against
/// its predecessor as already placed, starting from the predecessor's pose
/// (a good guess for a steadily turning table). All views need normals.
pub fn icp_register_sequence(
    views: &[PointCloud],
    options: &IcpOptions,
) -> Result<IcpSequenceResult> {
    if views.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "a sequence needs at least 2 views, got {}",
            views.len()
        )));
    }
    for v in views {
        if v.normals.is_none() {
            return Err(Error::MissingNormals);
        }
    }
    let mut transforms = vec![RigidTransform::identity()];
    let mut converged = true;
    for i in 1..views.len() {
        let base = transforms[i - 1];
        let scene = base.transform_cloud(&views[i - 1]);
        let data = base.transform_cloud(&views[i]);
        let result = icp_point_to_plane(&data, &scene, options)?;
        converged &= result.converged;
        transforms.push(result.transform.compose(&base));
    }
    Ok(IcpSequenceResult {
        transforms,
        converged,
    })
}
