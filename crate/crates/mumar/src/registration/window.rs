//! Joint registration of one window of consecutive views.
//!
//! Every view takes a turn as the moving side against the mean plane models
//! of the remaining views, and the sweep repeats until the residual error
//! stops changing. Rotations come from the marker normals alone;
//! translations from projecting centroids onto the target planes, so a face
//! whose centroid shifts with partial visibility still lands on the right
//! plane.

use serde::{Deserialize, Serialize};

use crate::correspondence::{CorrespondenceTable, MatchParams};
use crate::error::{Error, Result};
use crate::geometry::{
    angle_between_deg, rotation_from_normals, PlaneModel, PointCloud, RigidTransform,
    UnitVector3, Vector3,
};
use crate::icp::{icp_point_to_plane, IcpOptions};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegistrationOptions {
    /// Views registered jointly before the window slides by one.
    pub n_window: usize,
    /// Sweeps over the window per registration call.
    pub max_iterations: usize,
    /// Converged when the rotation error changes less than this per sweep.
    pub rot_tol_deg: f64,
    /// Converged when the translation error changes less than this per sweep.
    pub trans_tol: f64,
    /// Register each view once onto its predecessor before the joint sweeps.
    pub pairwise_init: bool,
    /// Refine rank-deficient views with ICP on their raw marker clouds.
    pub icp_fallback: bool,
    /// Re-register each window onto the committed plane history.
    pub scene_adjust: bool,
    /// Columns a face may skip and still rejoin its row.
    pub lookback: usize,
    pub match_params: MatchParams,
}

impl RegistrationOptions {
    /// Defaults with the length-based knobs scaled to the marker edge.
    pub fn for_marker_edge(edge: f64) -> Self {
        RegistrationOptions {
            n_window: 4,
            max_iterations: 200,
            rot_tol_deg: 0.01,
            trans_tol: 1e-4 * edge,
            pairwise_init: true,
            icp_fallback: true,
            scene_adjust: true,
            lookback: 2,
            match_params: MatchParams::for_marker_edge(edge),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_window < 2 {
            return Err(Error::Config("n_window must be >= 2".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if !(self.rot_tol_deg > 0.0) || !(self.trans_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.lookback == 0 {
            return Err(Error::Config("lookback must be >= 1".into()));
        }
        self.match_params.validate()
    }
}

impl Default for RegistrationOptions {
    fn default() -> Self {
        RegistrationOptions::for_marker_edge(1.0)
    }
}

/// Working state of one window: the correspondence table being moved in
/// place, the per-view increments accumulated so far, and (optionally) the
/// raw marker clouds backing the ICP fallback.
#[derive(Debug, Clone)]
pub struct WindowState {
    pub table: CorrespondenceTable,
    /// Per-view transform increments accrued this window; start at identity.
    pub transforms: Vec<RigidTransform>,
    /// Per-view marker clouds (with normals) in the window's entry frame.
    pub marker_clouds: Option<Vec<PointCloud>>,
}

impl WindowState {
    pub fn new(table: CorrespondenceTable) -> Self {
        let n = table.n_views();
        WindowState {
            table,
            transforms: vec![RigidTransform::identity(); n],
            marker_clouds: None,
        }
    }

    pub fn with_marker_clouds(
        table: CorrespondenceTable,
        clouds: Vec<PointCloud>,
    ) -> Result<Self> {
        if clouds.len() != table.n_views() {
            return Err(Error::LengthMismatch {
                left: clouds.len(),
                right: table.n_views(),
            });
        }
        let mut state = WindowState::new(table);
        state.marker_clouds = Some(clouds);
        Ok(state)
    }
}

#[derive(Debug, Clone)]
pub struct WindowReport {
    /// (rotation °, translation length) error before each sweep, then after
    /// every completed sweep.
    pub errors: Vec<(f64, f64)>,
    pub transforms: Vec<RigidTransform>,
    pub converged: bool,
    pub fallback_icp_used: bool,
    pub iterations: usize,
}

/// Mean plane per row over every view but `exclude_col` — the static target
/// the excluded view registers against. Rows visible only in the excluded
/// view come back as `None`.
pub fn scene_model(
    table: &CorrespondenceTable,
    exclude_col: usize,
) -> Result<Vec<Option<PlaneModel>>> {
    let models: Vec<Option<PlaneModel>> = (0..table.n_rows())
        .map(|row| table.row_mean_model(row, Some(exclude_col)))
        .collect();
    if models.iter().all(Option::is_none) {
        return Err(Error::EmptyScene);
    }
    Ok(models)
}

#[derive(Debug, Clone, Copy)]
pub struct ViewAlignment {
    pub transform: RigidTransform,
    /// The paired normals spanned fewer than two directions, so the
    /// rotation is the minimal one — consider an ICP refinement.
    pub rank_deficient: bool,
}

/// One registration step of a view's planes onto index-paired scene planes:
/// rotation from the normal sets, then translation as the mean displacement
/// from each rotated centroid to its projection on the scene plane.
///
/// The projection rule only corrects the component of an offset that the
/// paired normals can see; repeated application (as in the sweep loop)
/// contracts onto the full translation.
pub fn register_view_to_scene(data: &[PlaneModel], scene: &[PlaneModel]) -> Result<ViewAlignment> {
    if data.len() != scene.len() {
        return Err(Error::LengthMismatch {
            left: data.len(),
            right: scene.len(),
        });
    }
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let source: Vec<UnitVector3> = data.iter().map(|m| m.normal).collect();
    let target: Vec<UnitVector3> = scene.iter().map(|m| m.normal).collect();
    let estimate = rotation_from_normals(&source, &target)?;
    let mut translation = Vector3::zeros();
    for (d, s) in data.iter().zip(scene) {
        let moved = estimate.rotation * d.centroid;
        translation += s.project(&moved) - moved;
    }
    translation /= data.len() as f64;
    Ok(ViewAlignment {
        transform: RigidTransform::from_parts(estimate.rotation, translation),
        rank_deficient: estimate.rank_deficient,
    })
}

/// Residual mis-alignment of a window: every view compared against the mean
/// planes of the others, normal angles and centroid-to-plane distances each
/// summed over all (view, face) pairs and averaged over the views.
pub fn registration_error(table: &CorrespondenceTable) -> (f64, f64) {
    let n = table.n_views();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mut rot = 0.0;
    let mut trans = 0.0;
    for col in 0..n {
        for row in 0..table.n_rows() {
            let (Some(cell), Some(target)) =
                (table.model(row, col), table.row_mean_model(row, Some(col)))
            else {
                continue;
            };
            rot += angle_between_deg(&cell.normal, &target.normal);
            trans += target.distance(&cell.centroid);
        }
    }
    (rot / n as f64, trans / n as f64)
}

fn apply_increment(state: &mut WindowState, col: usize, delta: &RigidTransform) {
    state.transforms[col] = delta.compose(&state.transforms[col]);
    state.table.apply_to_column(col, delta);
}

/// ICP of one view's marker cloud against the others at their current
/// poses, used when that view's planes cannot pin the rotation. Rejection
/// is cranked up because plane-registered views overlap only partially.
fn icp_nudge(state: &mut WindowState, col: usize) -> Result<bool> {
    let Some(clouds) = &state.marker_clouds else {
        return Ok(false);
    };
    let parts: Vec<PointCloud> = clouds
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != col)
        .map(|(j, cloud)| state.transforms[j].transform_cloud(cloud))
        .collect();
    let scene = PointCloud::concat(&parts);
    let data = state.transforms[col].transform_cloud(&clouds[col]);
    let mut options = IcpOptions {
        rejection_fraction: 0.7,
        max_iterations: 30,
        ..IcpOptions::default()
    };
    options.use_boundaries =
        data.len() > options.boundary_k + 1 && scene.len() > options.boundary_k + 1;
    let result = icp_point_to_plane(&data, &scene, &options)?;
    apply_increment(state, col, &result.transform);
    Ok(true)
}

fn pair_score(error: (f64, f64), options: &RegistrationOptions) -> f64 {
    error.0 / options.rot_tol_deg + error.1 / options.trans_tol
}

/// Registers all views of a window against each other.
///
/// Optionally seeds each view on its predecessor, then sweeps the window —
/// each view in turn against the mean of the others — until both error
/// deltas drop below tolerance. On a failure to converge the lowest-error
/// state seen is restored and reported with `converged == false`.
pub fn multiview_register_window(
    state: &mut WindowState,
    options: &RegistrationOptions,
) -> Result<WindowReport> {
    options.validate()?;
    let n = state.table.n_views();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "a window needs at least 2 views, got {n}"
        )));
    }
    let mut fallback_icp_used = false;
    let mut errors = vec![registration_error(&state.table)];
    let mut best_score = pair_score(errors[0], options);
    let mut best = (state.transforms.clone(), state.table.clone());

    if options.pairwise_init {
        for i in 1..n {
            let mut data = Vec::new();
            let mut scene = Vec::new();
            for row in 0..state.table.n_rows() {
                if let (Some(d), Some(s)) = (state.table.model(row, i), state.table.model(row, i - 1))
                {
                    data.push(*d);
                    scene.push(*s);
                }
            }
            if data.is_empty() {
                continue;
            }
            let align = register_view_to_scene(&data, &scene)?;
            apply_increment(state, i, &align.transform);
        }
        let seeded = registration_error(&state.table);
        errors.push(seeded);
        let score = pair_score(seeded, options);
        if score < best_score {
            best_score = score;
            best = (state.transforms.clone(), state.table.clone());
        }
    }

    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..options.max_iterations {
        iterations += 1;
        for i in 0..n {
            let targets = scene_model(&state.table, i)?;
            let mut data = Vec::new();
            let mut scene = Vec::new();
            for (row, target) in targets.iter().enumerate() {
                if let (Some(d), Some(t)) = (state.table.model(row, i), target) {
                    data.push(*d);
                    scene.push(*t);
                }
            }
            if data.is_empty() {
                continue;
            }
            let align = register_view_to_scene(&data, &scene)?;
            apply_increment(state, i, &align.transform);
            if align.rank_deficient && options.icp_fallback {
                fallback_icp_used |= icp_nudge(state, i)?;
            }
        }
        let error = registration_error(&state.table);
        let previous = *errors.last().unwrap();
        errors.push(error);
        let score = pair_score(error, options);
        if score < best_score {
            best_score = score;
            best = (state.transforms.clone(), state.table.clone());
        }
        if (error.0 - previous.0).abs() < options.rot_tol_deg
            && (error.1 - previous.1).abs() < options.trans_tol
        {
            converged = true;
            break;
        }
    }

    if !converged {
        (state.transforms, state.table) = best;
    }
    Ok(WindowReport {
        errors,
        transforms: state.transforms.clone(),
        converged,
        fallback_icp_used,
        iterations,
    })
}
