use super::{fit_plane, Point3, PointCloud, UnitVector3};
use crate::error::{Error, Result};
use crate::spatial::KdTree3;

/// Estimates a normal per point from the tangent plane of its `k` nearest
/// neighbours, oriented to face `viewpoint` (the sensor position).
///
/// Returns a new cloud with the normals channel filled; points and labels are
/// copied through unchanged.
pub fn estimate_normals(cloud: &PointCloud, k: usize, viewpoint: &Point3) -> Result<PointCloud> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!(
            "normal estimation needs k >= 3 neighbours, got {k}"
        )));
    }
    if cloud.len() <= k {
        return Err(Error::TooFewPoints {
            needed: k + 1,
            got: cloud.len(),
        });
    }

    let tree = KdTree3::build(&cloud.points);
    let mut normals = Vec::with_capacity(cloud.len());
    let mut neighbours = Vec::with_capacity(k + 1);
    for (i, p) in cloud.points.iter().enumerate() {
        neighbours.clear();
        for (j, _) in tree.k_nearest(p, k + 1) {
            if j != i {
                neighbours.push(cloud.points[j]);
            }
        }
        neighbours.truncate(k);
        let mut normal = fit_plane(&neighbours).map(|m| m.normal);
        if normal.is_err() {
            // Degenerate neighbourhood (e.g. a perfect scan line): widen with
            // the point itself before giving up on a tangent plane entirely.
            neighbours.push(*p);
            normal = fit_plane(&neighbours).map(|m| m.normal);
        }
        let oriented = match normal {
            Ok(n) => orient(n, &(viewpoint - p)),
            // Still degenerate: point straight back at the sensor.
            Err(_) => UnitVector3::new_normalize(viewpoint - p),
        };
        normals.push(oriented);
    }
    cloud.clone().with_normals(normals)
}

fn orient(n: UnitVector3, towards: &super::Vector3) -> UnitVector3 {
    if n.dot(towards) < 0.0 {
        UnitVector3::new_unchecked(-n.into_inner())
    } else {
        n
    }
}
