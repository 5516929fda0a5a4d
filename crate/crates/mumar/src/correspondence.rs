//! Plane tracking across neighbouring views.
//!
//! Detected planes are identified from view to view by a combined
//! normal-angle / centroid-distance cost with hard gates, and collected into
//! a table whose rows are physical faces and whose columns are views. Faces
//! drop out of a column when invisible and may rejoin their old row if they
//! come back within the lookback horizon; anything unmatched starts a new
//! row. Registration then works directly on the columns of this table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_between_deg, PlaneModel, Point3, RigidTransform, UnitVector3};

/// The planes detected in one view, in detection order.
#[derive(Debug, Clone)]
pub struct ViewPlanes {
    pub view_index: usize,
    pub planes: Vec<PlaneModel>,
}

/// Gates and weighting for plane matching.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MatchParams {
    /// Reject candidate pairs whose normals enclose more than this.
    pub max_normal_angle_deg: f64,
    /// Reject candidate pairs whose centroids are farther apart than this.
    pub max_centroid_dist: f64,
}

impl MatchParams {
    /// Defaults scaled to a marker edge: 20° of normal swing and 0.3 edges
    /// of centroid travel, enough for a few turntable steps.
    pub fn for_marker_edge(edge: f64) -> Self {
        MatchParams {
            max_normal_angle_deg: 20.0,
            max_centroid_dist: 0.3 * edge,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_normal_angle_deg > 0.0) || !(self.max_centroid_dist > 0.0) {
            return Err(Error::Config("match gates must be positive".into()));
        }
        Ok(())
    }
}

/// One-to-one matching between the planes of two views.
///
/// Candidate pairs that pass both gates are ranked by the combined cost
/// `angle/max_angle + dist/max_dist` and accepted greedily, each plane at
/// most once. Exact cost ties resolve by the lower index pair, so the result
/// is deterministic. Returns `(index in a, index in b)` pairs sorted by the
/// first component; an empty result is a valid outcome.
pub fn match_planes(a: &ViewPlanes, b: &ViewPlanes, params: &MatchParams) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, pa) in a.planes.iter().enumerate() {
        for (j, pb) in b.planes.iter().enumerate() {
            let angle = angle_between_deg(&pa.normal, &pb.normal);
            if angle > params.max_normal_angle_deg {
                continue;
            }
            let dist = (pa.centroid - pb.centroid).norm();
            if dist > params.max_centroid_dist {
                continue;
            }
            let cost = angle / params.max_normal_angle_deg + dist / params.max_centroid_dist;
            candidates.push((cost, i, j));
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut used_a = vec![false; a.planes.len()];
    let mut used_b = vec![false; b.planes.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_by_key(|&(i, _)| i);
    pairs
}

/// A table cell: the plane as currently estimated for that view, plus the
/// index it had in the view's detection list (so updates can be written back).
#[derive(Debug, Clone, Copy)]
pub struct PlaneCell {
    pub model: PlaneModel,
    pub source_index: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TableRow {
    pub cells: Vec<Option<PlaneCell>>,
}

/// Faces × views correspondence table. `view_ids[c]` names the view behind
/// column `c`; a `None` cell means the face was not seen in that view.
#[derive(Debug, Clone)]
pub struct CorrespondenceTable {
    view_ids: Vec<usize>,
    rows: Vec<TableRow>,
}

impl CorrespondenceTable {
    /// Assembles a table from pre-built rows — the programmatic counterpart
    /// of [`build_table`] for callers that already know the layout.
    pub fn from_parts(view_ids: Vec<usize>, rows: Vec<TableRow>) -> Result<Self> {
        if view_ids.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (r, row) in rows.iter().enumerate() {
            if row.cells.len() != view_ids.len() {
                return Err(Error::InvalidParameter(format!(
                    "row {r} spans {} views, table has {}",
                    row.cells.len(),
                    view_ids.len()
                )));
            }
        }
        Ok(CorrespondenceTable { view_ids, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_views(&self) -> usize {
        self.view_ids.len()
    }

    pub fn view_ids(&self) -> &[usize] {
        &self.view_ids
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&PlaneCell> {
        self.rows[row].cells[col].as_ref()
    }

    pub fn model(&self, row: usize, col: usize) -> Option<&PlaneModel> {
        self.cell(row, col).map(|c| &c.model)
    }

    /// Cells of one column as `(row, cell)`, top to bottom.
    pub fn column_cells(&self, col: usize) -> Vec<(usize, &PlaneCell)> {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(r, row)| row.cells[col].as_ref().map(|c| (r, c)))
            .collect()
    }

    /// Moves every plane of a column by `t` (a view got re-registered).
    pub fn apply_to_column(&mut self, col: usize, t: &RigidTransform) {
        for row in &mut self.rows {
            if let Some(cell) = &mut row.cells[col] {
                cell.model = t.transform_plane(&cell.model);
            }
        }
    }

    /// Mean plane of a row — normalised mean of the normals, arithmetic mean
    /// of the centroids — optionally leaving one column out. `None` when no
    /// cell contributes (or opposing normals cancel exactly).
    pub fn row_mean_model(&self, row: usize, exclude_col: Option<usize>) -> Option<PlaneModel> {
        let mut normal_sum = nalgebra::Vector3::zeros();
        let mut centroid_sum = nalgebra::Vector3::zeros();
        let mut count = 0usize;
        for (col, cell) in self.rows[row].cells.iter().enumerate() {
            if exclude_col == Some(col) {
                continue;
            }
            if let Some(cell) = cell {
                normal_sum += cell.model.normal.into_inner();
                centroid_sum += cell.model.centroid.coords;
                count += 1;
            }
        }
        if count == 0 || normal_sum.norm() < 1e-12 {
            return None;
        }
        Some(PlaneModel::new(
            UnitVector3::new_normalize(normal_sum),
            Point3::from(centroid_sum / count as f64),
        ))
    }
}

/// Builds the correspondence table for a run of views.
///
/// Each view after the first is linked through whichever of the previous
/// `lookback` columns yields the most matches — ties favouring the more
/// recent one — matched planes joining that column's rows and the rest
/// opening fresh rows in view order.
pub fn build_table(
    views: &[ViewPlanes],
    params: &MatchParams,
    lookback: usize,
) -> Result<CorrespondenceTable> {
    params.validate()?;
    if views.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "a correspondence table needs at least 2 views, got {}",
            views.len()
        )));
    }
    if lookback == 0 {
        return Err(Error::InvalidParameter("lookback must be >= 1".into()));
    }
    for v in views {
        if v.planes.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "view {} has no planes to track",
                v.view_index
            )));
        }
    }

    let mut table = CorrespondenceTable {
        view_ids: views.iter().map(|v| v.view_index).collect(),
        rows: Vec::new(),
    };
    let n_cols = views.len();
    let new_row = |table: &mut CorrespondenceTable, col: usize, cell: PlaneCell| {
        let mut row = TableRow {
            cells: vec![None; n_cols],
        };
        row.cells[col] = Some(cell);
        table.rows.push(row);
    };

    for (i, model) in views[0].planes.iter().enumerate() {
        new_row(
            &mut table,
            0,
            PlaneCell {
                model: *model,
                source_index: i,
            },
        );
    }

    for col in 1..n_cols {
        // Pick the linking column: most matches, recency breaking ties.
        let mut best: Option<(usize, Vec<(usize, usize)>)> = None;
        for back in 1..=lookback.min(col) {
            let prev_col = col - back;
            let prev_cells = table.column_cells(prev_col);
            if prev_cells.is_empty() {
                continue;
            }
            let pseudo = ViewPlanes {
                view_index: table.view_ids[prev_col],
                planes: prev_cells.iter().map(|(_, c)| c.model).collect(),
            };
            let pairs = match_planes(&views[col], &pseudo, params);
            let better = match &best {
                None => true,
                Some((_, best_pairs)) => pairs.len() > best_pairs.len(),
            };
            if better {
                let rows: Vec<(usize, usize)> = pairs
                    .iter()
                    .map(|&(i, j)| (i, prev_cells[j].0))
                    .collect();
                best = Some((prev_col, rows));
            }
        }

        let matched = best.map(|(_, rows)| rows).unwrap_or_default();
        let mut placed = vec![false; views[col].planes.len()];
        for (plane_idx, row) in matched {
            debug_assert!(table.rows[row].cells[col].is_none());
            table.rows[row].cells[col] = Some(PlaneCell {
                model: views[col].planes[plane_idx],
                source_index: plane_idx,
            });
            placed[plane_idx] = true;
        }
        for (plane_idx, model) in views[col].planes.iter().enumerate() {
            if !placed[plane_idx] {
                new_row(
                    &mut table,
                    col,
                    PlaneCell {
                        model: *model,
                        source_index: plane_idx,
                    },
                );
            }
        }
    }
    debug_assert!(table.rows.iter().all(|r| r.cells.iter().any(Option::is_some)));
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vector3;
    use approx::assert_abs_diff_eq;
    use nalgebra::{Rotation3, Unit};

    fn plane(nx: f64, ny: f64, nz: f64, cx: f64, cy: f64, cz: f64) -> PlaneModel {
        PlaneModel::new(
            Unit::new_normalize(Vector3::new(nx, ny, nz)),
            Point3::new(cx, cy, cz),
        )
    }

    /// The visible face planes of a unit cube at the origin, as seen after
    /// the table has turned by `theta_deg`: faces whose rotated normal keeps
    /// a component towards the fixed camera on +x (plus the top).
    fn cube_view(view_index: usize, theta_deg: f64) -> ViewPlanes {
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), theta_deg.to_radians());
        let faces = [
            plane(1.0, 0.0, 0.0, 0.5, 0.0, 0.5),
            plane(0.0, 1.0, 0.0, 0.0, 0.5, 0.5),
            plane(-1.0, 0.0, 0.0, -0.5, 0.0, 0.5),
            plane(0.0, -1.0, 0.0, 0.0, -0.5, 0.5),
        ];
        let mut planes: Vec<PlaneModel> = faces
            .iter()
            .map(|f| {
                PlaneModel::new(
                    Unit::new_normalize(rot * f.normal.into_inner()),
                    Point3::from(rot * f.centroid.coords),
                )
            })
            .filter(|f| f.normal.x > 0.2) // facing the camera
            .collect();
        planes.push(plane(0.0, 0.0, 1.0, 0.0, 0.0, 1.0)); // top, always visible
        ViewPlanes { view_index, planes }
    }

    fn params() -> MatchParams {
        MatchParams::for_marker_edge(1.0)
    }

    #[test]
    fn identical_views_match_identically() {
        let v = cube_view(0, 30.0);
        let pairs = match_planes(&v, &v, &params());
        assert_eq!(pairs.len(), v.planes.len());
        for (k, &(i, j)) in pairs.iter().enumerate() {
            assert_eq!((i, j), (k, k));
        }
    }

    #[test]
    fn slightly_rotated_views_keep_their_pairing() {
        let a = cube_view(0, 40.0);
        let b = cube_view(1, 46.0);
        assert_eq!(a.planes.len(), b.planes.len());
        let pairs = match_planes(&a, &b, &params());
        assert_eq!(pairs.len(), a.planes.len());
        for &(i, j) in &pairs {
            assert_eq!(i, j, "face order is stable for a small step");
        }
    }

    #[test]
    fn gates_reject_bad_candidates() {
        let a = ViewPlanes {
            view_index: 0,
            planes: vec![plane(1.0, 0.0, 0.0, 0.0, 0.0, 0.0)],
        };
        // 25° off with coincident centroids: angle gate trips.
        let tilted = ViewPlanes {
            view_index: 1,
            planes: vec![PlaneModel::new(
                Unit::new_normalize(Vector3::new(25f64.to_radians().cos(), 25f64.to_radians().sin(), 0.0)),
                Point3::origin(),
            )],
        };
        assert!(match_planes(&a, &tilted, &params()).is_empty());
        // Same normal but centroids 0.4 apart: distance gate trips.
        let far = ViewPlanes {
            view_index: 1,
            planes: vec![plane(1.0, 0.0, 0.0, 0.0, 0.4, 0.0)],
        };
        assert!(match_planes(&a, &far, &params()).is_empty());
    }

    #[test]
    fn greedy_assignment_prefers_the_cheaper_pair() {
        // Both of a's planes could match b0; the closer one must take it and
        // the other should fall through to b1.
        let a = ViewPlanes {
            view_index: 0,
            planes: vec![
                plane(1.0, 0.0, 0.0, 0.0, 0.01, 0.0),
                plane(1.0, 0.0, 0.0, 0.0, 0.10, 0.0),
            ],
        };
        let b = ViewPlanes {
            view_index: 1,
            planes: vec![
                plane(1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
                plane(1.0, 0.0, 0.0, 0.0, 0.2, 0.0),
            ],
        };
        let pairs = match_planes(&a, &b, &params());
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn removed_plane_leaves_no_spurious_match() {
        let a = cube_view(0, 40.0);
        let mut b = cube_view(1, 44.0);
        b.planes.remove(0);
        let pairs = match_planes(&a, &b, &params());
        assert_eq!(pairs.len(), a.planes.len() - 1);
        assert!(pairs.iter().all(|&(i, _)| i != 0));
    }

    #[test]
    fn table_tracks_faces_over_a_revolution_segment() {
        // 6 views, 15° apart: face visibility changes along the way.
        let views: Vec<ViewPlanes> = (0..6).map(|v| cube_view(v, 15.0 * v as f64)).collect();
        let table = build_table(&views, &params(), 2).unwrap();
        assert_eq!(table.n_views(), 6);
        // Each column carries exactly its view's planes, in distinct rows.
        for col in 0..6 {
            let cells = table.column_cells(col);
            assert_eq!(cells.len(), views[col].planes.len());
            let mut rows: Vec<usize> = cells.iter().map(|&(r, _)| r).collect();
            rows.dedup();
            assert_eq!(rows.len(), cells.len());
        }
        // The top face (last plane of every view) stays in a single row.
        let top_rows: std::collections::BTreeSet<usize> = (0..6)
            .map(|col| {
                table
                    .column_cells(col)
                    .into_iter()
                    .find(|(_, c)| c.source_index == views[col].planes.len() - 1)
                    .unwrap()
                    .0
            })
            .collect();
        assert_eq!(top_rows.len(), 1);
        // Row count equals the number of distinct physical faces seen: the
        // +x side, the -y side that rotates into view, and the top.
        assert_eq!(table.n_rows(), 3);
    }

    #[test]
    fn flickering_plane_rejoins_its_row_within_lookback() {
        // 2° steps keep the visible face set constant over the run.
        let mut views: Vec<ViewPlanes> = (0..4).map(|v| cube_view(v, 2.0 * v as f64)).collect();
        // The first face disappears for exactly one view.
        let dropped = views[2].planes.remove(0);
        let table = build_table(&views, &params(), 2).unwrap();
        views[2].planes.insert(0, dropped);
        // Face 0 of views 0, 1 and 3 share a row with a hole at column 2.
        let row0 = table
            .column_cells(0)
            .into_iter()
            .find(|(_, c)| c.source_index == 0)
            .unwrap()
            .0;
        assert!(table.cell(row0, 1).is_some());
        assert!(table.cell(row0, 2).is_none());
        assert!(table.cell(row0, 3).is_some(), "flicker not recovered");
        assert_eq!(table.n_rows(), views[0].planes.len());
    }

    #[test]
    fn reappearance_beyond_lookback_starts_a_new_row() {
        let mut views: Vec<ViewPlanes> = (0..5).map(|v| cube_view(v, 2.0 * v as f64)).collect();
        // The first face is gone for two consecutive views, one more than
        // lookback = 2 can bridge from view 4.
        views[2].planes.remove(0);
        views[3].planes.remove(0);
        let table = build_table(&views, &params(), 2).unwrap();
        let row0 = table
            .column_cells(0)
            .into_iter()
            .find(|(_, c)| c.source_index == 0)
            .unwrap()
            .0;
        assert!(table.cell(row0, 3).is_none());
        assert!(table.cell(row0, 4).is_none(), "stale row was resurrected");
        // The face's return shows up as a fresh row instead.
        assert_eq!(table.n_rows(), views[0].planes.len() + 1);
    }

    #[test]
    fn equal_match_counts_link_through_the_more_recent_view() {
        let f = plane(1.0, 0.0, 0.0, 0.5, 0.0, 0.0);
        let g = plane(1.0, 0.0, 0.0, 0.5, 0.35, 0.0);
        let f_cur = plane(1.0, 0.0, 0.0, 0.5, 0.06, 0.0);
        // Column 0 sees F (row 0); column 1 sees G, too far from F to share
        // its row (row 1); the current plane is within the gates of both, so
        // either linking column yields exactly one match.
        let views = vec![
            ViewPlanes { view_index: 0, planes: vec![f] },
            ViewPlanes { view_index: 1, planes: vec![g] },
            ViewPlanes { view_index: 2, planes: vec![f_cur] },
        ];
        let table = build_table(&views, &params(), 2).unwrap();
        assert_eq!(table.n_rows(), 2);
        assert!(table.cell(1, 2).is_some(), "recency tie-break violated");
        assert!(table.cell(0, 2).is_none());
    }

    #[test]
    fn row_means_average_normals_and_centroids() {
        let views = vec![
            ViewPlanes {
                view_index: 0,
                planes: vec![plane(1.0, 0.0, 0.0, 1.0, 0.0, 0.0)],
            },
            ViewPlanes {
                view_index: 1,
                planes: vec![plane(1.0, 0.02, 0.0, 1.0, 0.1, 0.0)],
            },
        ];
        let table = build_table(&views, &params(), 2).unwrap();
        let mean = table.row_mean_model(0, None).unwrap();
        assert_abs_diff_eq!(mean.centroid, Point3::new(1.0, 0.05, 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(mean.normal.norm(), 1.0, epsilon = 1e-12);
        let excl = table.row_mean_model(0, Some(1)).unwrap();
        assert_abs_diff_eq!(excl.centroid, Point3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
        assert!(table.row_mean_model(0, Some(0)).is_some());
    }

    #[test]
    fn apply_to_column_moves_only_that_column() {
        let views = vec![cube_view(0, 0.0), cube_view(1, 6.0)];
        let mut table = build_table(&views, &params(), 2).unwrap();
        let before_col0: Vec<PlaneModel> =
            table.column_cells(0).iter().map(|(_, c)| c.model).collect();
        let shift = RigidTransform::from_parts(
            Rotation3::identity(),
            Vector3::new(0.0, 0.0, 1.0),
        );
        table.apply_to_column(1, &shift);
        for ((_, cell), before) in table.column_cells(0).iter().zip(&before_col0) {
            assert_eq!(cell.model.centroid, before.centroid);
        }
        for (row, cell) in table.column_cells(1) {
            let original = views[1].planes[cell.source_index];
            assert_abs_diff_eq!(
                cell.model.centroid,
                Point3::from(original.centroid.coords + Vector3::new(0.0, 0.0, 1.0)),
                epsilon = 1e-12
            );
            let _ = row;
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let v = cube_view(0, 0.0);
        assert!(matches!(
            build_table(&[v.clone()], &params(), 2),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            build_table(&[v.clone(), v.clone()], &params(), 0),
            Err(Error::InvalidParameter(_))
        ));
        let empty = ViewPlanes {
            view_index: 1,
            planes: vec![],
        };
        assert!(matches!(
            build_table(&[v.clone(), empty], &params(), 2),
            Err(Error::InvalidParameter(_))
        ));
        let bad = MatchParams {
            max_normal_angle_deg: 0.0,
            max_centroid_dist: 1.0,
        };
        assert!(matches!(
            build_table(&[v.clone(), v], &bad, 2),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn reversed_sequences_produce_the_same_row_count() {
        let mut views: Vec<ViewPlanes> = (0..6).map(|v| cube_view(v, 15.0 * v as f64)).collect();
        let forward = build_table(&views, &params(), 2).unwrap();
        views.reverse();
        for (i, v) in views.iter_mut().enumerate() {
            v.view_index = i;
        }
        let backward = build_table(&views, &params(), 2).unwrap();
        assert_eq!(forward.n_rows(), backward.n_rows());
    }
}
