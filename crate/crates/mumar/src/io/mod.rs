//! File formats: PLY point clouds, plain-text rigid transforms and the JSON
//! dataset manifest.
//!
//! Everything round-trips losslessly at `f64`, so a written artefact reads
//! back bit-identical — re-running a pipeline stage from disk reproduces the
//! in-memory run exactly.

mod manifest;
mod ply;

pub use manifest::{ViewEntry, ViewManifest};
pub use ply::{read_ply, write_ply, write_ply_with_distances, PlyFormat};

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::RigidTransform;

/// Writes a transform as a 4×4 row-major matrix: four lines of four
/// space-separated numbers.
pub fn write_transform(transform: &RigidTransform, path: &Path) -> Result<()> {
    let mut out = String::new();
    for row in transform.to_rows() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a 4×4 row-major matrix written by [`write_transform`]. Line breaks
/// are immaterial; any 16 whitespace-separated numbers will do, but the
/// matrix must be a rigid transform.
pub fn read_transform(path: &Path) -> Result<RigidTransform> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = [[0.0f64; 4]; 4];
    let mut tokens = text.split_whitespace();
    for row in &mut values {
        for v in row.iter_mut() {
            let token = tokens.next().ok_or_else(|| {
                Error::InvalidTransform(format!("{}: expected 16 numbers", path.display()))
            })?;
            *v = token.parse().map_err(|_| {
                Error::InvalidTransform(format!(
                    "{}: not a number: {token:?}",
                    path.display()
                ))
            })?;
        }
    }
    if tokens.next().is_some() {
        return Err(Error::InvalidTransform(format!(
            "{}: trailing data after 16 numbers",
            path.display()
        )));
    }
    RigidTransform::from_rows(&values)
}
