//! Sliding-window registration of a whole view sequence.
//!
//! Windows of `n_window` consecutive views are registered jointly, then the
//! window advances one view: the first view's increment is carried onto
//! everything registered before the window (and the committed plane
//! history, which lives in that frame), the last view's increment onto
//! everything still ahead, the whole window is re-registered onto the
//! history, and the departing view's planes are committed to it.

use serde::{Deserialize, Serialize};

use crate::correspondence::{
    build_table, match_planes, CorrespondenceTable, MatchParams, ViewPlanes,
};
use crate::error::{Error, Result};
use crate::geometry::{PlaneModel, PointCloud, RigidTransform};
use crate::registration::structure::SceneStructure;
use crate::registration::window::{
    multiview_register_window, register_view_to_scene, RegistrationOptions, WindowState,
};

/// One row of the error trace: the window-level error before sweep
/// `iteration` of window `window`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorSample {
    pub window: usize,
    pub iteration: usize,
    pub rot_deg: f64,
    pub trans: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegistrationReport {
    /// Per view, the transform into the common frame.
    pub transforms: Vec<RigidTransform>,
    pub error_trace: Vec<ErrorSample>,
    pub converged: bool,
    pub fallback_icp_used: bool,
    pub n_windows: usize,
}

/// Registers the window's per-row mean planes onto the committed history.
/// `None` when the history is empty or shares no face with the window.
pub fn scene_adjust(
    table: &CorrespondenceTable,
    structure: &SceneStructure,
    params: &MatchParams,
) -> Result<Option<RigidTransform>> {
    if structure.is_empty() {
        return Ok(None);
    }
    let window_means: Vec<PlaneModel> = (0..table.n_rows())
        .filter_map(|row| table.row_mean_model(row, None))
        .collect();
    if window_means.is_empty() {
        return Ok(None);
    }
    let data = ViewPlanes {
        view_index: 0,
        planes: window_means,
    };
    let scene = ViewPlanes {
        view_index: 0,
        planes: structure.row_means(),
    };
    let pairs = match_planes(&data, &scene, params);
    if pairs.is_empty() {
        return Ok(None);
    }
    let d: Vec<PlaneModel> = pairs.iter().map(|(i, _)| data.planes[*i]).collect();
    let s: Vec<PlaneModel> = pairs.iter().map(|(_, j)| scene.planes[*j]).collect();
    let align = register_view_to_scene(&d, &s)?;
    Ok(Some(align.transform))
}

fn transform_models(models: &mut [PlaneModel], t: &RigidTransform) {
    for m in models {
        *m = t.transform_plane(m);
    }
}

/// Registers a whole sequence of per-view plane sets into a common frame.
///
/// `views` must be in capture order with increasing `view_index`. When the
/// ICP fallback is enabled, `marker_clouds` (one cloud per view, with
/// normals, in that view's own frame) backs it; pass `None` to rely on the
/// planes alone. Returns per-view absolute transforms; a window that fails
/// to converge keeps its best effort and clears the report's flag instead
/// of aborting.
pub fn register_sequence(
    views: &[ViewPlanes],
    marker_clouds: Option<&[PointCloud]>,
    options: &RegistrationOptions,
) -> Result<RegistrationReport> {
    options.validate()?;
    let n = views.len();
    let w = options.n_window;
    if n < w {
        return Err(Error::InvalidParameter(format!(
            "need at least n_window = {w} views, got {n}"
        )));
    }
    if let Some(clouds) = marker_clouds {
        if clouds.len() != n {
            return Err(Error::LengthMismatch {
                left: clouds.len(),
                right: n,
            });
        }
        if options.icp_fallback && clouds.iter().any(|c| c.normals.is_none()) {
            return Err(Error::MissingNormals);
        }
    }

    let mut current: Vec<Vec<PlaneModel>> = views.iter().map(|v| v.planes.clone()).collect();
    let mut absolute = vec![RigidTransform::identity(); n];
    let mut structure = SceneStructure::new();
    let mut trace = Vec::new();
    let mut converged = true;
    let mut fallback_icp_used = false;

    let steps = n - w + 1;
    for s in 0..steps {
        let window_views: Vec<ViewPlanes> = (s..s + w)
            .map(|v| ViewPlanes {
                view_index: views[v].view_index,
                planes: current[v].clone(),
            })
            .collect();
        let table = build_table(&window_views, &options.match_params, options.lookback)?;
        let mut state = match marker_clouds {
            Some(clouds) if options.icp_fallback => WindowState::with_marker_clouds(
                table,
                (s..s + w)
                    .map(|v| absolute[v].transform_cloud(&clouds[v]))
                    .collect(),
            )?,
            _ => WindowState::new(table),
        };
        let report = multiview_register_window(&mut state, options)?;
        converged &= report.converged;
        fallback_icp_used |= report.fallback_icp_used;
        for (k, e) in report.errors.iter().enumerate() {
            trace.push(ErrorSample {
                window: s,
                iteration: k,
                rot_deg: e.0,
                trans: e.1,
            });
        }

        // Propagation: the first view's increment carries the registered
        // prefix (and the history that lives in its frame), the last view's
        // increment carries the pending suffix.
        let delta_first = state.transforms[0];
        let delta_last = state.transforms[w - 1];
        for v in 0..s {
            absolute[v] = delta_first.compose(&absolute[v]);
            transform_models(&mut current[v], &delta_first);
        }
        if s > 0 {
            structure.apply_transform(&delta_first);
        }
        for v in s + w..n {
            absolute[v] = delta_last.compose(&absolute[v]);
            transform_models(&mut current[v], &delta_last);
        }

        // Absorb the window increments and write the registered models back.
        for k in 0..w {
            absolute[s + k] = state.transforms[k].compose(&absolute[s + k]);
        }
        for col in 0..w {
            for (_, cell) in state.table.column_cells(col) {
                current[s + col][cell.source_index] = cell.model;
            }
        }

        if options.scene_adjust {
            if let Some(adjust) = scene_adjust(&state.table, &structure, &options.match_params)? {
                for v in s..s + w {
                    absolute[v] = adjust.compose(&absolute[v]);
                    transform_models(&mut current[v], &adjust);
                }
            }
        }

        structure.commit(&current[s], views[s].view_index, &options.match_params);
    }

    Ok(RegistrationReport {
        transforms: absolute,
        error_trace: trace,
        converged,
        fallback_icp_used,
        n_windows: steps,
    })
}

/// Carries the object along: each object view mapped by its view's
/// transform, all merged into one cloud with no down-sampling.
pub fn transform_object(
    object_views: &[PointCloud],
    transforms: &[RigidTransform],
) -> Result<PointCloud> {
    if object_views.len() != transforms.len() {
        return Err(Error::LengthMismatch {
            left: object_views.len(),
            right: transforms.len(),
        });
    }
    if object_views.is_empty() {
        return Err(Error::EmptyInput);
    }
    let parts: Vec<PointCloud> = object_views
        .iter()
        .zip(transforms)
        .map(|(cloud, t)| t.transform_cloud(cloud))
        .collect();
    Ok(PointCloud::concat(&parts))
}
