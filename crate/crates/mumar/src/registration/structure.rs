//! Append-only history of committed plane models.
//!
//! As the window slides forward, the departing view's planes are filed here
//! row-by-row — one row per physical face of the scene. Registering each
//! window against the row means keeps a face that vanishes and later
//! reappears consistent with its old self and bounds drift over long
//! sequences.

use crate::correspondence::{match_planes, MatchParams, ViewPlanes};
use crate::geometry::{PlaneModel, Point3, RigidTransform, UnitVector3, Vector3};

#[derive(Debug, Clone)]
pub struct StructureEntry {
    pub model: PlaneModel,
    /// View the model was committed from.
    pub view_id: usize,
}

/// Per-face rows of committed `(model, view)` entries, in commit order.
#[derive(Debug, Clone, Default)]
pub struct SceneStructure {
    rows: Vec<Vec<StructureEntry>>,
}

impl SceneStructure {
    pub fn new() -> Self {
        SceneStructure::default()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<StructureEntry>] {
        &self.rows
    }

    /// Mean model per row: renormalised mean normal, arithmetic mean
    /// centroid.
    pub fn row_means(&self) -> Vec<PlaneModel> {
        self.rows
            .iter()
            .map(|row| {
                let mut normal_sum = Vector3::zeros();
                let mut centroid_sum = Vector3::zeros();
                for entry in row {
                    normal_sum += entry.model.normal.into_inner();
                    centroid_sum += entry.model.centroid.coords;
                }
                let normal = if normal_sum.norm() < 1e-12 {
                    row[0].model.normal
                } else {
                    UnitVector3::new_normalize(normal_sum)
                };
                PlaneModel::new(normal, Point3::from(centroid_sum / row.len() as f64))
            })
            .collect()
    }

    /// Carries the whole history along when the committed frame itself is
    /// moved (pre-propagation of a window's first-view transform).
    pub fn apply_transform(&mut self, t: &RigidTransform) {
        for row in &mut self.rows {
            for entry in row {
                entry.model = t.transform_plane(&entry.model);
            }
        }
    }

    /// Files a departing view's planes: each one joins the row whose mean
    /// model it matches, and the leftovers open new rows. `view_id` must
    /// exceed every previously committed one.
    pub fn commit(&mut self, planes: &[PlaneModel], view_id: usize, params: &MatchParams) {
        let data = ViewPlanes {
            view_index: view_id,
            planes: planes.to_vec(),
        };
        let target = ViewPlanes {
            view_index: 0,
            planes: self.row_means(),
        };
        let pairs = match_planes(&data, &target, params);
        let mut filed = vec![false; planes.len()];
        for (i, row) in pairs {
            debug_assert!(
                self.rows[row].last().is_none_or(|e| e.view_id < view_id),
                "commit order regressed in row {row}"
            );
            self.rows[row].push(StructureEntry {
                model: planes[i],
                view_id,
            });
            filed[i] = true;
        }
        for (i, model) in planes.iter().enumerate() {
            if !filed[i] {
                self.rows.push(vec![StructureEntry {
                    model: *model,
                    view_id,
                }]);
            }
        }
        debug_assert!(self.rows_coherent(), "structure row normals diverged");
    }

    /// Sanity bound: all normals of a row within 30° of each other.
    fn rows_coherent(&self) -> bool {
        self.rows.iter().all(|row| {
            row.iter().all(|a| {
                row.iter().all(|b| {
                    crate::geometry::angle_between_deg(&a.model.normal, &b.model.normal) <= 30.0
                })
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_between_deg;
    use nalgebra::Rotation3;

    fn plane(nx: f64, ny: f64, nz: f64, cx: f64, cy: f64, cz: f64) -> PlaneModel {
        PlaneModel::new(
            UnitVector3::new_normalize(Vector3::new(nx, ny, nz)),
            Point3::new(cx, cy, cz),
        )
    }

    fn params() -> MatchParams {
        MatchParams::for_marker_edge(1.0)
    }

    fn triplet() -> Vec<PlaneModel> {
        vec![
            plane(1.0, 0.0, 0.0, 0.5, 0.0, 0.0),
            plane(0.0, 1.0, 0.0, 0.0, 0.5, 0.0),
            plane(0.0, 0.0, 1.0, 0.0, 0.0, 0.5),
        ]
    }

    #[test]
    fn identical_commits_stack_one_entry_per_view() {
        let mut structure = SceneStructure::new();
        for view in 0..3 {
            structure.commit(&triplet(), view, &params());
        }
        assert_eq!(structure.n_rows(), 3);
        for row in structure.rows() {
            assert_eq!(row.len(), 3);
            assert_eq!(
                row.iter().map(|e| e.view_id).collect::<Vec<_>>(),
                vec![0, 1, 2]
            );
        }
    }

    #[test]
    fn an_unseen_plane_opens_a_new_row() {
        let mut structure = SceneStructure::new();
        structure.commit(&triplet(), 0, &params());
        let mut extended = triplet();
        extended.push(plane(0.0, 0.0, -1.0, 0.0, 0.0, -0.5));
        structure.commit(&extended, 1, &params());
        assert_eq!(structure.n_rows(), 4);
        assert_eq!(structure.rows()[3].len(), 1);
        assert_eq!(structure.rows()[3][0].view_id, 1);
    }

    #[test]
    fn row_means_average_commits() {
        let mut structure = SceneStructure::new();
        structure.commit(&[plane(0.0, 0.0, 1.0, 0.0, 0.0, 0.0)], 0, &params());
        structure.commit(&[plane(0.05, 0.0, 1.0, 0.1, 0.0, 0.02)], 1, &params());
        let means = structure.row_means();
        assert_eq!(means.len(), 1);
        assert!((means[0].centroid - Point3::new(0.05, 0.0, 0.01)).norm() < 1e-12);
        let expected = UnitVector3::new_normalize(
            Vector3::new(0.0, 0.0, 1.0) + Vector3::new(0.05, 0.0, 1.0).normalize(),
        );
        assert!(angle_between_deg(&means[0].normal, &expected) < 1e-12);
    }

    #[test]
    fn transforming_the_structure_moves_its_means_rigidly() {
        let mut structure = SceneStructure::new();
        structure.commit(&triplet(), 0, &params());
        let before = structure.row_means();
        let t = RigidTransform::from_parts(
            Rotation3::from_euler_angles(0.2, -0.1, 0.4),
            Vector3::new(1.0, -2.0, 0.5),
        );
        structure.apply_transform(&t);
        let after = structure.row_means();
        for (b, a) in before.iter().zip(&after) {
            let moved = t.transform_plane(b);
            assert!(angle_between_deg(&moved.normal, &a.normal) < 1e-12);
            assert!((moved.centroid - a.centroid).norm() < 1e-12);
        }
    }

    #[test]
    fn reappearing_plane_rejoins_its_row() {
        let mut structure = SceneStructure::new();
        structure.commit(&triplet(), 0, &params());
        // The z-up face goes unseen for a while…
        structure.commit(&triplet()[..2], 1, &params());
        structure.commit(&triplet()[..2], 2, &params());
        // …and comes back slightly perturbed.
        let mut back = triplet();
        back[2] = plane(0.02, 0.0, 1.0, 0.01, 0.0, 0.5);
        structure.commit(&back, 3, &params());
        assert_eq!(structure.n_rows(), 3);
        assert_eq!(
            structure.rows()[2]
                .iter()
                .map(|e| e.view_id)
                .collect::<Vec<_>>(),
            vec![0, 3]
        );
    }
}
