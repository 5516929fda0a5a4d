//! Shape-agreement measurement for registered clouds.
//!
//! Distances are directed: every point of the result is measured to its
//! nearest reference primitive — the nearest point of a reference cloud, or
//! the nearest surface point of a reference mesh. The extremes of that
//! distribution are the directed Hausdorff bounds; mean and RMS summarise
//! overall agreement. [`fine_align`] removes any residual global pose offset
//! first, so the numbers reflect shape error rather than a constant
//! misalignment.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{estimate_normals, Point3, PointCloud, RigidTransform};
use crate::icp::{icp_point_to_plane, IcpOptions};
use crate::spatial::KdTree3;
use crate::synth::{sample_surface, MarkerShape, TriangleMesh};

/// Neighbourhood size when a reference cloud arrives without normals.
const NORMAL_NEIGHBOURS: usize = 12;

/// Surface samples drawn from a mesh reference for alignment.
const MESH_ALIGN_SAMPLES: usize = 30_000;

/// Summary of a per-point nearest-distance distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub rms: f64,
    pub n_samples: usize,
}

impl DistanceStats {
    /// Folds a non-empty sample of distances into min/max/mean/RMS.
    pub fn from_distances(distances: &[f64]) -> Result<Self> {
        if distances.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for &d in distances {
            min = min.min(d);
            max = max.max(d);
            sum += d;
            sum_sq += d * d;
        }
        let n = distances.len() as f64;
        let stats = DistanceStats {
            min,
            max,
            mean: sum / n,
            rms: (sum_sq / n).sqrt(),
            n_samples: distances.len(),
        };
        let slack = 1e-12 * (1.0 + stats.max);
        debug_assert!(stats.min <= stats.max);
        debug_assert!(stats.mean <= stats.rms + slack);
        debug_assert!(stats.rms <= stats.max + slack);
        Ok(stats)
    }
}

/// What a registered cloud is measured against.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    /// Distances go to the nearest reference point.
    Cloud(&'a PointCloud),
    /// Distances go to the nearest point anywhere on the surface.
    Mesh(&'a TriangleMesh),
}

impl Reference<'_> {
    fn check_nonempty(&self) -> Result<()> {
        let empty = match self {
            Reference::Cloud(cloud) => cloud.is_empty(),
            Reference::Mesh(mesh) => mesh.triangles.is_empty(),
        };
        if empty {
            Err(Error::EmptyInput)
        } else {
            Ok(())
        }
    }
}

/// Distance from each result point to its nearest reference primitive, in
/// result order. This is the raw distribution behind
/// [`directed_distance_stats`], exposed separately so exports can colour
/// points by it.
pub fn per_point_distances(result: &PointCloud, reference: Reference) -> Result<Vec<f64>> {
    if result.is_empty() {
        return Err(Error::EmptyInput);
    }
    reference.check_nonempty()?;
    match reference {
        Reference::Cloud(cloud) => {
            let tree = KdTree3::build(&cloud.points);
            Ok(result
                .points
                .iter()
                .map(|p| tree.nearest(p).1.sqrt())
                .collect())
        }
        Reference::Mesh(mesh) => Ok(result
            .points
            .iter()
            .map(|p| mesh.point_distance(p))
            .collect()),
    }
}

/// Directed distance statistics from `result` to `reference`.
pub fn directed_distance_stats(
    result: &PointCloud,
    reference: Reference,
) -> Result<DistanceStats> {
    DistanceStats::from_distances(&per_point_distances(result, reference)?)
}

/// Registers `result` onto the reference with the baseline ICP and returns
/// the moved cloud together with the transform that was applied. Mesh
/// references are sampled densely; cloud references get normals estimated
/// if they carry none.
pub fn fine_align(
    result: &PointCloud,
    reference: Reference,
    options: &IcpOptions,
) -> Result<(PointCloud, RigidTransform)> {
    if result.is_empty() {
        return Err(Error::EmptyInput);
    }
    reference.check_nonempty()?;
    let scene = match reference {
        Reference::Cloud(cloud) => {
            if cloud.normals.is_some() {
                cloud.clone()
            } else {
                estimate_normals(cloud, NORMAL_NEIGHBOURS, &Point3::origin())?
            }
        }
        Reference::Mesh(mesh) => sample_surface(mesh, MESH_ALIGN_SAMPLES, 0),
    };
    let icp = icp_point_to_plane(result, &scene, options)?;
    if !icp.converged {
        return Err(Error::NotConverged);
    }
    Ok((icp.transform.transform_cloud(result), icp.transform))
}

/// Registration backend named in benchmark rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mumar,
    Icp,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mumar => "mumar",
            Method::Icp => "icp",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mumar" => Ok(Method::Mumar),
            "icp" => Ok(Method::Icp),
            other => Err(Error::Config(format!(
                "unknown method {other:?}; expected mumar or icp"
            ))),
        }
    }
}

/// One measured cell of the comparison grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub method: Method,
    pub object: MarkerShape,
    /// Noise sigma the dataset was generated with, in length units.
    pub sigma: f64,
    pub stats: DistanceStats,
}

/// Method × object × noise grid of distance statistics.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub entries: Vec<BenchmarkEntry>,
}

impl BenchmarkReport {
    pub fn push(&mut self, entry: BenchmarkEntry) {
        self.entries.push(entry);
    }

    fn find(&self, method: Method, object: MarkerShape, sigma: f64) -> Option<&BenchmarkEntry> {
        self.entries
            .iter()
            .find(|e| e.method == method && e.object == object && e.sigma == sigma)
    }

    /// ICP mean distance over marker-registration mean distance for one
    /// grid cell; `None` until both methods have been measured there.
    pub fn ratio(&self, object: MarkerShape, sigma: f64) -> Option<f64> {
        let icp = self.find(Method::Icp, object, sigma)?;
        let mumar = self.find(Method::Mumar, object, sigma)?;
        Some(icp.stats.mean / mumar.stats.mean)
    }

    /// Arithmetic mean of [`BenchmarkReport::ratio`] over every cell where
    /// both methods are present.
    pub fn mean_ratio(&self) -> Option<f64> {
        let ratios: Vec<f64> = self
            .cells()
            .iter()
            .filter_map(|&(object, sigma)| self.ratio(object, sigma))
            .collect();
        if ratios.is_empty() {
            None
        } else {
            Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
        }
    }

    /// Distinct (object, sigma) cells in first-appearance order.
    fn cells(&self) -> Vec<(MarkerShape, f64)> {
        let mut cells: Vec<(MarkerShape, f64)> = Vec::new();
        for e in &self.entries {
            if !cells.iter().any(|&(o, s)| o == e.object && s == e.sigma) {
                cells.push((e.object, e.sigma));
            }
        }
        cells
    }

    /// One CSV row per entry; the ratio column repeats the cell's value on
    /// every row of that cell once both methods are in.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("method,object,sigma,min,max,mean,rms,n_samples,icp_over_mumar_mean\n");
        for e in &self.entries {
            let ratio = self
                .ratio(e.object, e.sigma)
                .map(|r| format!("{r:.6}"))
                .unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                e.method.as_str(),
                e.object.as_str(),
                e.sigma,
                e.stats.min,
                e.stats.max,
                e.stats.mean,
                e.stats.rms,
                e.stats.n_samples,
                ratio,
            )
            .expect("writing to a String cannot fail");
        }
        out
    }

    /// Fixed-width table for terminals, grouped by cell.
    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{:<16} {:>9} {:<7} {:>11} {:>11} {:>11} {:>11} {:>8} {:>10}\n",
            "object", "sigma", "method", "min", "max", "mean", "rms", "n", "icp/mumar"
        );
        for (object, sigma) in self.cells() {
            for method in [Method::Mumar, Method::Icp] {
                let Some(e) = self.find(method, object, sigma) else {
                    continue;
                };
                let ratio = if method == Method::Icp {
                    self.ratio(object, sigma)
                        .map(|r| format!("{r:10.3}"))
                        .unwrap_or_default()
                } else {
                    String::new()
                };
                writeln!(
                    out,
                    "{:<16} {:>9.5} {:<7} {:>11.6} {:>11.6} {:>11.6} {:>11.6} {:>8} {}",
                    object.as_str(),
                    sigma,
                    method.as_str(),
                    e.stats.min,
                    e.stats.max,
                    e.stats.mean,
                    e.stats.rms,
                    e.stats.n_samples,
                    ratio,
                )
                .expect("writing to a String cannot fail");
            }
        }
        out
    }
}
