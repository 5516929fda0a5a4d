//! The dataset manifest: a JSON index of per-view files.
//!
//! Upstream segmentation delivers each view as one cloud per marker plus an
//! object cloud; the manifest records where those live, view by view, in
//! turntable order. Paths are stored relative to the manifest file, so a
//! dataset directory can be moved or shipped as-is.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One turntable stop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewEntry {
    /// One cloud per marker, in a marker order that is fixed across views.
    pub marker_clouds: Vec<PathBuf>,
    pub object_cloud: PathBuf,
    /// Camera-to-scene transform file, when ground truth is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
}

/// Ordered per-view file index for a whole scan.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ViewManifest {
    pub views: Vec<ViewEntry>,
}

impl ViewManifest {
    /// Structural checks: at least one view, the same marker count
    /// everywhere, and ground truth either for every view or for none.
    pub fn validate(&self) -> Result<()> {
        let first = self
            .views
            .first()
            .ok_or_else(|| Error::Config("manifest has no views".into()))?;
        for (i, view) in self.views.iter().enumerate() {
            if view.marker_clouds.is_empty() {
                return Err(Error::Config(format!("view {i} has no marker clouds")));
            }
            if view.marker_clouds.len() != first.marker_clouds.len() {
                return Err(Error::Config(format!(
                    "view {i} has {} marker clouds, view 0 has {}",
                    view.marker_clouds.len(),
                    first.marker_clouds.len()
                )));
            }
            if view.ground_truth.is_some() != first.ground_truth.is_some() {
                return Err(Error::Config(format!(
                    "ground truth present for some views but missing for view {}",
                    if first.ground_truth.is_some() { i } else { 0 }
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("manifest serialisation failed: {e}")))?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    /// Loads, validates, resolves every path against the manifest's own
    /// directory, and checks that each referenced file exists.
    pub fn load(path: &Path) -> Result<ViewManifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: ViewManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: bad manifest: {e}", path.display())))?;
        manifest.validate()?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for view in &mut manifest.views {
            for marker in &mut view.marker_clouds {
                *marker = resolve(base, marker)?;
            }
            view.object_cloud = resolve(base, &view.object_cloud)?;
            if let Some(gt) = &view.ground_truth {
                view.ground_truth = Some(resolve(base, gt)?);
            }
        }
        Ok(manifest)
    }
}

fn resolve(base: &Path, relative: &Path) -> Result<PathBuf> {
    let path = if relative.is_absolute() {
        relative.to_path_buf()
    } else {
        base.join(relative)
    };
    if !path.is_file() {
        return Err(Error::io(
            &path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "referenced by manifest"),
        ));
    }
    Ok(path)
}
