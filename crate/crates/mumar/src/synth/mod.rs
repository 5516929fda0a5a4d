//! Synthetic turntable scanner.
//!
//! Builds camera-frame point clouds of a static scene — marker polyhedra
//! around a central object — seen from a camera that orbits the turntable
//! axis in fixed angular steps. Visibility is honest: back faces are culled
//! and occluded samples are removed by ray casting, so a view contains
//! exactly what a depth sensor in that pose would see. Every view comes with
//! the camera-to-scene transform as ground truth.

mod mesh;

pub use mesh::{
    closest_point_on_triangle, generate_mesh, segment_hits_triangle, MarkerShape, TriangleMesh,
};

use nalgebra::{Matrix3, Rotation3, Unit};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, RigidTransform, Vector3};

/// Position plus rotation about the vertical axis; all scene elements stand
/// upright on the turntable.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Pose {
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
}

impl Pose {
    pub fn at(x: f64, y: f64, z: f64, yaw_deg: f64) -> Self {
        Pose {
            position: [x, y, z],
            yaw_deg,
        }
    }

    pub fn to_transform(&self) -> RigidTransform {
        RigidTransform::from_parts(
            Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw_deg.to_radians()),
            Vector3::new(self.position[0], self.position[1], self.position[2]),
        )
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MarkerSpec {
    pub shape: MarkerShape,
    pub edge: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: MarkerShape,
    pub size: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CameraSpec {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TurnSpec {
    pub n_views: usize,
    pub step_deg: f64,
}

/// Everything needed to render a full turntable sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub markers: Vec<MarkerSpec>,
    #[serde(default)]
    pub object: Option<ObjectSpec>,
    pub camera: CameraSpec,
    pub turn: TurnSpec,
    /// Samples per unit² of front-facing surface.
    pub density: f64,
    /// Standard deviation of sensor noise, in scene units; 0 disables it.
    #[serde(default)]
    pub noise_sigma: f64,
    /// Perturb along all three axes instead of along the viewing ray.
    #[serde(default)]
    pub isotropic_noise: bool,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.markers.is_empty() {
            return Err(Error::Config("scene has no markers".into()));
        }
        if !(self.density > 0.0) {
            return Err(Error::Config("density must be positive".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        if self.turn.n_views == 0 {
            return Err(Error::Config("n_views must be >= 1".into()));
        }
        let total = self.turn.n_views as f64 * self.turn.step_deg;
        if !(0.0..=360.0 + 1e-9).contains(&total) {
            return Err(Error::Config(format!(
                "turn covers {total}°, expected within a single revolution"
            )));
        }
        Ok(())
    }

    /// A lone marker at the origin, seen corner-on from above the horizon so
    /// that three faces of a cube are visible. Single view, no object.
    pub fn single_marker(shape: MarkerShape, edge: f64, density: f64) -> SceneSpec {
        SceneSpec {
            markers: vec![MarkerSpec {
                shape,
                edge,
                pose: Pose::at(0.0, 0.0, 0.0, 0.0),
            }],
            object: None,
            camera: CameraSpec {
                position: [edge * 4.0, edge * 3.0, edge * 3.5],
                look_at: [0.0, 0.0, edge * 0.5],
            },
            turn: TurnSpec {
                n_views: 1,
                step_deg: 0.0,
            },
            density,
            noise_sigma: 0.0,
            isotropic_noise: false,
        }
    }

    /// Typical length scale: the median marker edge. Used to derive
    /// distance-like defaults.
    pub fn marker_edge(&self) -> f64 {
        let mut edges: Vec<f64> = self.markers.iter().map(|m| m.edge).collect();
        edges.sort_by(f64::total_cmp);
        edges[edges.len() / 2]
    }
}

/// The benchmark arrangement used throughout the examples and tests: four
/// cube markers with distinct yaws surrounding a central object, 60 views of
/// 6°, 2000 samples per unit².
pub fn default_benchmark_scene(object: MarkerShape) -> SceneSpec {
    let object_spec = match object {
        MarkerShape::Cube => ObjectSpec {
            shape: object,
            size: 0.8,
            pose: Pose::at(0.0, 0.0, 0.0, 20.0),
        },
        MarkerShape::Pyramid => ObjectSpec {
            shape: object,
            size: 0.9,
            pose: Pose::at(0.0, 0.0, 0.0, 35.0),
        },
        MarkerShape::DoublePyramid => ObjectSpec {
            shape: object,
            size: 0.7,
            pose: Pose::at(0.0, 0.0, 0.0, 50.0),
        },
    };
    let radius = 2.6;
    let marker = |angle_deg: f64, yaw: f64| MarkerSpec {
        shape: MarkerShape::Cube,
        edge: 1.0,
        pose: Pose::at(
            radius * angle_deg.to_radians().cos(),
            radius * angle_deg.to_radians().sin(),
            0.0,
            yaw,
        ),
    };
    SceneSpec {
        markers: vec![
            marker(45.0, 10.0),
            marker(135.0, 35.0),
            marker(225.0, 60.0),
            marker(315.0, 85.0),
        ],
        object: Some(object_spec),
        camera: CameraSpec {
            position: [7.0, 0.0, 4.5],
            look_at: [0.0, 0.0, 0.5],
        },
        turn: TurnSpec {
            n_views: 60,
            step_deg: 6.0,
        },
        density: 2000.0,
        noise_sigma: 0.0,
        isotropic_noise: false,
    }
}

/// One rendered view: camera-frame clouds per marker, the object cloud, and
/// the camera-to-scene transform that would undo the turntable exactly.
#[derive(Debug, Clone)]
pub struct SyntheticView {
    pub marker_clouds: Vec<PointCloud>,
    pub object_cloud: Option<PointCloud>,
    pub ground_truth: RigidTransform,
}

/// Deterministically derives an independent RNG stream from a base seed
/// (splitmix64 of `base XOR salt`).
pub fn mix_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Renders one turntable step.
///
/// The scene stays fixed; the camera orbits by `-view_index·step` about z,
/// which is indistinguishable from rotating the table by `+step` per view.
/// Returned clouds are in the camera frame (sensor at the origin, z towards
/// the scene) and carry face labels but no normals — those are estimated
/// downstream like for real scans. `ground_truth` maps the camera frame back
/// onto the static scene.
pub fn render_view(spec: &SceneSpec, view_index: usize, rng_seed: u64) -> Result<SyntheticView> {
    spec.validate()?;
    if view_index >= spec.turn.n_views {
        return Err(Error::InvalidParameter(format!(
            "view {view_index} out of range, scene has {} views",
            spec.turn.n_views
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let theta = (view_index as f64 * spec.turn.step_deg).to_radians();
    let orbit = Rotation3::from_axis_angle(&Vector3::z_axis(), -theta);
    let cam_pos = Point3::from(orbit * Vector3::from(spec.camera.position));
    let look_at = Point3::from(orbit * Vector3::from(spec.camera.look_at));
    let ground_truth = camera_pose(&cam_pos, &look_at);
    let to_camera = ground_truth.inverse();

    let meshes: Vec<TriangleMesh> = spec
        .markers
        .iter()
        .map(|m| generate_mesh(m.shape, m.edge).transformed(&m.pose.to_transform()))
        .chain(
            spec.object
                .iter()
                .map(|o| generate_mesh(o.shape, o.size).transformed(&o.pose.to_transform())),
        )
        .collect();
    let boxes: Vec<(Point3, Point3)> = meshes.iter().map(|m| m.bounding_box()).collect();

    let mut clouds = Vec::with_capacity(meshes.len());
    for (mesh_idx, mesh) in meshes.iter().enumerate() {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for tri in 0..mesh.triangles.len() {
            let normal = mesh.triangle_normal(tri);
            let [a, b, c] = mesh.corners(tri);
            let centroid = Point3::from((a.coords + b.coords + c.coords) / 3.0);
            if normal.dot(&(cam_pos - centroid)) <= 0.0 {
                continue; // back face
            }
            let face = mesh.face_ids[tri];
            for sample in sample_triangle(&a, &b, &c, spec.density, &mut rng) {
                if occluded(&sample, &cam_pos, &meshes, &boxes, mesh_idx, face) {
                    continue;
                }
                points.push(to_camera.transform_point(&sample));
                labels.push(face as i32);
            }
        }
        clouds.push(PointCloud::from_points(points).with_labels(labels).unwrap());
    }

    let object_cloud = spec.object.is_some().then(|| clouds.pop().unwrap());
    Ok(SyntheticView {
        marker_clouds: clouds,
        object_cloud,
        ground_truth,
    })
}

/// Camera-to-scene transform for a camera at `pos` looking at `target`, with
/// +z forward and +x to the right of the (world-up referenced) image.
fn camera_pose(pos: &Point3, target: &Point3) -> RigidTransform {
    let forward = Unit::new_normalize(target - pos);
    let up_ref = if forward.z.abs() < 0.999 {
        Vector3::z()
    } else {
        Vector3::y()
    };
    let right = Unit::new_normalize(up_ref.cross(&forward));
    let up = forward.cross(&right);
    let rotation = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[
        right.into_inner(),
        up,
        forward.into_inner(),
    ]));
    RigidTransform::from_parts(rotation, pos.coords)
}

/// Stratified samples over a triangle at the requested areal density. The
/// expected count is exactly `density·area`: the fractional remainder is
/// resolved with one Bernoulli draw.
fn sample_triangle(
    a: &Point3,
    b: &Point3,
    c: &Point3,
    density: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Point3> {
    let area = (b - a).cross(&(c - a)).norm() / 2.0;
    let target = density * area;
    let mut n = target.floor() as usize;
    if rng.random::<f64>() < target.fract() {
        n += 1;
    }
    if n == 0 {
        return Vec::new();
    }
    let grid = (n as f64).sqrt().ceil() as usize;
    let mut cells: Vec<Point3> = Vec::with_capacity(grid * grid);
    for row in 0..grid {
        for col in 0..grid {
            let mut u = (col as f64 + rng.random::<f64>()) / grid as f64;
            let mut v = (row as f64 + rng.random::<f64>()) / grid as f64;
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            cells.push(a + (b - a) * u + (c - a) * v);
        }
    }
    // Keep exactly n of the grid² candidates without spatial bias.
    cells.shuffle(rng);
    cells.truncate(n);
    cells
}

/// Exactly `n_points` area-weighted uniform samples over a mesh surface,
/// carrying the outward face normals and face labels. Per-triangle counts
/// follow the largest-remainder rule, so the total is exact and the split
/// deterministic for a given mesh.
pub fn sample_surface(mesh: &TriangleMesh, n_points: usize, rng_seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let total_area = mesh.surface_area();
    let n_tris = mesh.triangles.len();
    let mut counts = vec![0usize; n_tris];
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(n_tris);
    let mut assigned = 0usize;
    for tri in 0..n_tris {
        let share = n_points as f64 * mesh.triangle_area(tri) / total_area;
        counts[tri] = share.floor() as usize;
        assigned += counts[tri];
        remainders.push((share.fract(), tri));
    }
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, tri) in remainders.iter().take(n_points - assigned) {
        counts[tri] += 1;
    }

    let mut points = Vec::with_capacity(n_points);
    let mut normals = Vec::with_capacity(n_points);
    let mut labels = Vec::with_capacity(n_points);
    for (tri, &count) in counts.iter().enumerate() {
        let [a, b, c] = mesh.corners(tri);
        let normal = mesh.triangle_normal(tri);
        for _ in 0..count {
            let su = rng.random::<f64>().sqrt();
            let v = rng.random::<f64>();
            points.push(a + (b - a) * (su * (1.0 - v)) + (c - a) * (su * v));
            normals.push(normal);
            labels.push(mesh.face_ids[tri] as i32);
        }
    }
    PointCloud::from_points(points)
        .with_normals(normals)
        .and_then(|c| c.with_labels(labels))
        .expect("channel lengths match by construction")
}

/// Is the segment from `sample` to the camera blocked by any triangle?
/// Triangles of the sample's own face are skipped (they are coplanar with
/// the sample and cannot shadow it).
fn occluded(
    sample: &Point3,
    cam_pos: &Point3,
    meshes: &[TriangleMesh],
    boxes: &[(Point3, Point3)],
    own_mesh: usize,
    own_face: u32,
) -> bool {
    let dir = cam_pos - sample;
    for (mesh_idx, mesh) in meshes.iter().enumerate() {
        if !segment_meets_box(sample, &dir, &boxes[mesh_idx]) {
            continue;
        }
        for tri in 0..mesh.triangles.len() {
            if mesh_idx == own_mesh && mesh.face_ids[tri] == own_face {
                continue;
            }
            let [a, b, c] = mesh.corners(tri);
            if segment_hits_triangle(sample, &dir, &a, &b, &c, 1e-9, 1.0 - 1e-9) {
                return true;
            }
        }
    }
    false
}

/// Slab test of `origin + t·dir, t ∈ [0, 1]` against an axis-aligned box.
fn segment_meets_box(origin: &Point3, dir: &Vector3, (lo, hi): &(Point3, Point3)) -> bool {
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for a in 0..3 {
        if dir[a].abs() < 1e-300 {
            if origin[a] < lo[a] || origin[a] > hi[a] {
                return false;
            }
            continue;
        }
        let inv = 1.0 / dir[a];
        let (near, far) = if inv >= 0.0 {
            ((lo[a] - origin[a]) * inv, (hi[a] - origin[a]) * inv)
        } else {
            ((hi[a] - origin[a]) * inv, (lo[a] - origin[a]) * inv)
        };
        t0 = t0.max(near);
        t1 = t1.min(far);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// How positional noise is directed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// Displace along the sensor ray, the dominant error of depth cameras.
    AlongRay,
    /// Independent Gaussian per axis.
    Isotropic,
}

/// Adds zero-mean Gaussian sensor noise of standard deviation `sigma` to
/// every cloud of the view, along each point's viewing ray. `sigma = 0`
/// returns the view unchanged.
pub fn add_noise(view: &SyntheticView, sigma: f64, rng_seed: u64) -> SyntheticView {
    add_noise_with_model(view, sigma, NoiseModel::AlongRay, rng_seed)
}

pub fn add_noise_with_model(
    view: &SyntheticView,
    sigma: f64,
    model: NoiseModel,
    rng_seed: u64,
) -> SyntheticView {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    if sigma == 0.0 {
        return view.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let dist = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let mut perturb = |cloud: &PointCloud| -> PointCloud {
        let mut out = cloud.clone();
        for p in &mut out.points {
            match model {
                NoiseModel::AlongRay => {
                    // Camera frame: the ray through p starts at the origin.
                    let dir = p.coords.normalize();
                    *p += dir * rng.sample(dist);
                }
                NoiseModel::Isotropic => {
                    *p += Vector3::new(rng.sample(dist), rng.sample(dist), rng.sample(dist));
                }
            }
        }
        out
    };
    SyntheticView {
        marker_clouds: view.marker_clouds.iter().map(&mut perturb).collect(),
        object_cloud: view.object_cloud.as_ref().map(&mut perturb),
        ground_truth: view.ground_truth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_between_deg;
    use approx::assert_abs_diff_eq;

    fn flat_scene(camera: [f64; 3]) -> SceneSpec {
        SceneSpec {
            markers: vec![MarkerSpec {
                shape: MarkerShape::Cube,
                edge: 1.0,
                pose: Pose::at(0.0, 0.0, 0.0, 0.0),
            }],
            object: None,
            camera: CameraSpec {
                position: camera,
                look_at: [0.0, 0.0, 0.5],
            },
            turn: TurnSpec {
                n_views: 1,
                step_deg: 0.0,
            },
            density: 400.0,
            noise_sigma: 0.0,
            isotropic_noise: false,
        }
    }

    fn visible_faces(view: &SyntheticView) -> Vec<i32> {
        let mut faces: Vec<i32> = view.marker_clouds[0]
            .labels
            .as_ref()
            .unwrap()
            .iter()
            .copied()
            .collect();
        faces.sort_unstable();
        faces.dedup();
        faces
    }

    #[test]
    fn face_on_camera_sees_one_face() {
        // Straight down the +x axis at cube height: only face 0 (+x) is
        // front-facing and unoccluded.
        let view = render_view(&flat_scene([6.0, 0.0, 0.5]), 0, 42).unwrap();
        assert_eq!(visible_faces(&view), vec![0]);
    }

    #[test]
    fn corner_camera_sees_three_faces() {
        let view = render_view(&flat_scene([4.0, 3.0, 3.5]), 0, 42).unwrap();
        // +x, +y and top.
        assert_eq!(visible_faces(&view), vec![0, 2, 4]);
    }

    #[test]
    fn sample_count_tracks_face_area() {
        let view = render_view(&flat_scene([6.0, 0.0, 0.5]), 0, 7).unwrap();
        let n = view.marker_clouds[0].len() as f64;
        // One unit² face at density 400; Bernoulli rounding keeps the count
        // within a few percent.
        assert!((n - 400.0).abs() < 80.0, "got {n} samples");
    }

    #[test]
    fn clouds_are_in_front_of_the_camera() {
        let view = render_view(&flat_scene([4.0, 3.0, 3.5]), 0, 42).unwrap();
        for p in &view.marker_clouds[0].points {
            assert!(p.z > 0.0, "point behind the sensor: {p:?}");
        }
    }

    #[test]
    fn ground_truth_restores_the_static_scene() {
        // The cube at the origin has its +x face in the plane x = 0.5
        // regardless of the view; ground_truth must put samples back there.
        let mut spec = flat_scene([6.0, 0.0, 0.5]);
        spec.turn = TurnSpec {
            n_views: 8,
            step_deg: 45.0,
        };
        let mut face0_views = 0;
        for v in 0..8 {
            let view = render_view(&spec, v, 99).unwrap();
            let restored = view.ground_truth.transform_cloud(&view.marker_clouds[0]);
            assert!(!restored.is_empty());
            let mut seen = false;
            for (p, &label) in restored
                .points
                .iter()
                .zip(restored.labels.as_ref().unwrap())
            {
                if label == 0 {
                    assert_abs_diff_eq!(p.x, 0.5, epsilon = 1e-9);
                    seen = true;
                }
            }
            face0_views += seen as usize;
        }
        // The +x face comes and goes over the revolution but is seen from
        // several stations.
        assert!(face0_views >= 3, "face 0 visible in {face0_views} views");
    }

    #[test]
    fn occlusion_shadows_a_wall_behind_a_wall() {
        // A small cube sits between the camera and a big cube. Points of the
        // big cube's +x face inside the small cube's shadow must vanish.
        let spec = SceneSpec {
            markers: vec![
                MarkerSpec {
                    shape: MarkerShape::Cube,
                    edge: 2.0,
                    pose: Pose::at(0.0, 0.0, 0.0, 0.0),
                },
                MarkerSpec {
                    shape: MarkerShape::Cube,
                    edge: 0.5,
                    pose: Pose::at(3.0, 0.0, 0.75, 0.0),
                },
            ],
            object: None,
            camera: CameraSpec {
                position: [100.0, 0.0, 1.0],
                look_at: [0.0, 0.0, 1.0],
            },
            turn: TurnSpec {
                n_views: 1,
                step_deg: 0.0,
            },
            density: 500.0,
            noise_sigma: 0.0,
            isotropic_noise: false,
        };
        let view = render_view(&spec, 0, 5).unwrap();
        let big = view.ground_truth.transform_cloud(&view.marker_clouds[0]);
        let mut shadowed = 0;
        for (p, &label) in big.points.iter().zip(big.labels.as_ref().unwrap()) {
            if label != 0 {
                continue;
            }
            // From x = 100 the 0.5-cube covers roughly its own footprint on
            // the far wall (the projection grows only ~1% over the gap).
            let inside = p.y.abs() < 0.11 && (p.z - 1.0).abs() < 0.11;
            if inside {
                shadowed += 1;
            }
        }
        assert_eq!(shadowed, 0, "{shadowed} points survived inside the shadow");
        // Sanity: the face itself is present.
        assert!(big.len() > 1000);
    }

    #[test]
    fn rendering_is_deterministic_per_seed() {
        let spec = flat_scene([4.0, 3.0, 3.5]);
        let a = render_view(&spec, 0, 1234).unwrap();
        let b = render_view(&spec, 0, 1234).unwrap();
        assert_eq!(a.marker_clouds[0].points, b.marker_clouds[0].points);
        let c = render_view(&spec, 0, 1235).unwrap();
        assert_ne!(a.marker_clouds[0].points, c.marker_clouds[0].points);
    }

    #[test]
    fn ray_noise_moves_points_only_along_their_ray() {
        let view = render_view(&flat_scene([4.0, 3.0, 3.5]), 0, 8).unwrap();
        let noisy = add_noise(&view, 0.01, 77);
        let clean = &view.marker_clouds[0].points;
        let moved = &noisy.marker_clouds[0].points;
        for (p, q) in clean.iter().zip(moved) {
            let delta = q - p;
            if delta.norm() < 1e-15 {
                continue;
            }
            let along = angle_between_deg(
                &Unit::new_normalize(p.coords),
                &Unit::new_normalize(delta.normalize() * delta.dot(&p.coords).signum()),
            );
            assert!(along < 1e-6, "offset not colinear with the ray: {along}°");
        }
    }

    #[test]
    fn noise_statistics_match_sigma() {
        let mut spec = flat_scene([6.0, 0.0, 0.5]);
        spec.density = 40000.0; // ~40k samples for tight statistics
        let view = render_view(&spec, 0, 3).unwrap();
        let sigma = 0.005;
        let noisy = add_noise(&view, sigma, 4);
        let offsets: Vec<f64> = view.marker_clouds[0]
            .points
            .iter()
            .zip(&noisy.marker_clouds[0].points)
            .map(|(p, q)| (q - p).dot(&p.coords.normalize()))
            .collect();
        let n = offsets.len() as f64;
        let mean = offsets.iter().sum::<f64>() / n;
        let var = offsets.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 5e-5, "mean {mean}");
        assert!(
            (var.sqrt() - sigma).abs() / sigma < 0.05,
            "std {} vs {sigma}",
            var.sqrt()
        );
    }

    #[test]
    fn zero_sigma_is_identity() {
        let view = render_view(&flat_scene([6.0, 0.0, 0.5]), 0, 3).unwrap();
        let same = add_noise(&view, 0.0, 999);
        assert_eq!(view.marker_clouds[0].points, same.marker_clouds[0].points);
    }

    #[test]
    fn benchmark_scene_markers_surround_the_object() {
        let spec = default_benchmark_scene(MarkerShape::Cube);
        spec.validate().unwrap();
        assert_eq!(spec.markers.len(), 4);
        assert_eq!(spec.turn.n_views, 60);
        assert_abs_diff_eq!(spec.turn.n_views as f64 * spec.turn.step_deg, 360.0);
        // One marker per quadrant, all clear of the object footprint.
        let mut quadrants = [false; 4];
        let object_radius = spec.object.unwrap().size;
        for m in &spec.markers {
            let [x, y, _] = m.pose.position;
            let q = match (x > 0.0, y > 0.0) {
                (true, true) => 0,
                (false, true) => 1,
                (false, false) => 2,
                (true, false) => 3,
            };
            quadrants[q] = true;
            assert!((x * x + y * y).sqrt() > object_radius + m.edge);
        }
        assert!(quadrants.iter().all(|&q| q));
        let yaws: std::collections::BTreeSet<i64> = spec
            .markers
            .iter()
            .map(|m| m.pose.yaw_deg.round() as i64)
            .collect();
        assert_eq!(yaws.len(), 4, "marker yaws must differ");
    }

    #[test]
    fn invalid_scenes_are_rejected() {
        let mut spec = flat_scene([6.0, 0.0, 0.5]);
        spec.turn = TurnSpec {
            n_views: 100,
            step_deg: 6.0,
        };
        assert!(spec.validate().is_err());
        let mut spec = flat_scene([6.0, 0.0, 0.5]);
        spec.density = 0.0;
        assert!(spec.validate().is_err());
        let mut spec = flat_scene([6.0, 0.0, 0.5]);
        spec.markers.clear();
        assert!(spec.validate().is_err());
        assert!(render_view(&flat_scene([6.0, 0.0, 0.5]), 3, 0).is_err());
    }

    #[test]
    fn seed_mixing_separates_streams() {
        let a = mix_seed(42, 0);
        let b = mix_seed(42, 1);
        let c = mix_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, mix_seed(42, 0));
    }

    #[test]
    fn surface_sampling_is_exact_uniform_and_on_surface() {
        let mesh = generate_mesh(MarkerShape::Cube, 1.0);
        let cloud = sample_surface(&mesh, 6000, 7);
        assert_eq!(cloud.len(), 6000);
        assert!(cloud.normals.is_some() && cloud.labels.is_some());
        for p in &cloud.points {
            assert!(mesh.point_distance(p) < 1e-12);
        }

        // Area-uniform: each of the six equal faces receives ~1/6 of the
        // samples, and the per-face label matches the mesh's face id.
        let labels = cloud.labels.as_ref().unwrap();
        let mut per_face = [0usize; 6];
        for &l in labels {
            per_face[l as usize] += 1;
        }
        for &count in &per_face {
            assert!((900..=1100).contains(&count), "skewed face count {count}");
        }

        let normals = cloud.normals.as_ref().unwrap();
        let centre = Point3::new(0.0, 0.0, 0.5);
        for (p, n) in cloud.points.iter().zip(normals) {
            // Cube faces are axis-aligned: the sample must lie on the face
            // plane its outward normal names.
            assert_abs_diff_eq!((p - centre).dot(n), 0.5, epsilon = 1e-12);
        }

        let again = sample_surface(&mesh, 6000, 7);
        assert_eq!(cloud.points, again.points);
        let other = sample_surface(&mesh, 6000, 8);
        assert_ne!(cloud.points, other.points);
    }
}
