use super::{Point3, UnitVector3};
use crate::error::{Error, Result};

/// A point cloud with optional per-point normals and integer face labels.
///
/// Normals and labels, when present, run parallel to `points`; the
/// constructors keep the lengths in sync. Labels carry the generating face id
/// in synthetic data and survive every transform untouched.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub normals: Option<Vec<UnitVector3>>,
    pub labels: Option<Vec<i32>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Point3>) -> Self {
        PointCloud {
            points,
            normals: None,
            labels: None,
        }
    }

    pub fn with_normals(mut self, normals: Vec<UnitVector3>) -> Result<Self> {
        if normals.len() != self.points.len() {
            return Err(Error::LengthMismatch {
                left: self.points.len(),
                right: normals.len(),
            });
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<i32>) -> Result<Self> {
        if labels.len() != self.points.len() {
            return Err(Error::LengthMismatch {
                left: self.points.len(),
                right: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Result<Point3> {
        if self.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut acc = nalgebra::Vector3::zeros();
        for p in &self.points {
            acc += p.coords;
        }
        Ok(Point3::from(acc / self.points.len() as f64))
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> Result<(Point3, Point3)> {
        if self.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points[1..] {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        Ok((lo, hi))
    }

    /// Concatenates clouds in order. Normals (or labels) are kept only when
    /// every part carries them, otherwise the merged cloud drops the channel.
    pub fn concat(parts: &[PointCloud]) -> PointCloud {
        let keep_normals = !parts.is_empty() && parts.iter().all(|c| c.normals.is_some());
        let keep_labels = !parts.is_empty() && parts.iter().all(|c| c.labels.is_some());
        let mut out = PointCloud::default();
        for part in parts {
            out.points.extend_from_slice(&part.points);
        }
        if keep_normals {
            let mut normals = Vec::with_capacity(out.points.len());
            for part in parts {
                normals.extend_from_slice(part.normals.as_ref().unwrap());
            }
            out.normals = Some(normals);
        }
        if keep_labels {
            let mut labels = Vec::with_capacity(out.points.len());
            for part in parts {
                labels.extend_from_slice(part.labels.as_ref().unwrap());
            }
            out.labels = Some(labels);
        }
        out
    }
}
