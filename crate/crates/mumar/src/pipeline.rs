//! End-to-end runs: generate a dataset on disk, register it, evaluate the
//! merged result. This is the layer the command-line binary calls; each step
//! reads and writes only files, so stages can be re-run and mixed freely.
//!
//! Artefact names are fixed (see the `*_FILE` constants). A `generate` run
//! produces per-view directories with one PLY per marker, the object cloud
//! and the ground-truth transform, indexed by a manifest. A `register` run
//! turns a dataset into per-view transforms, a merged object cloud and a
//! report; `evaluate` measures a merged cloud against a reference.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::correspondence::ViewPlanes;
use crate::detection::{detect_marker_planes, RansacParams};
use crate::error::{Error, Result};
use crate::evaluation::{fine_align, per_point_distances, DistanceStats, Method, Reference};
use crate::geometry::{estimate_normals, Point3, PointCloud, RigidTransform};
use crate::icp::{icp_register_sequence, IcpOptions};
use crate::io::{
    read_ply, read_transform, write_ply, write_ply_with_distances, write_transform, PlyFormat,
    ViewEntry, ViewManifest,
};
use crate::registration::{register_sequence, transform_object, RegistrationReport};
use crate::synth::{
    add_noise_with_model, generate_mesh, mix_seed, render_view, sample_surface, NoiseModel,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "run_config.json";
/// Dense ground-truth sampling of the object surface, static scene frame.
pub const REFERENCE_FILE: &str = "reference_object.ply";
/// Merged object in the registration's own (first-view) frame.
pub const MERGED_FILE: &str = "merged_object.ply";
/// Merged object re-anchored into the scene frame via the first view's
/// ground truth, present when the dataset carries ground truth.
pub const MERGED_SCENE_FILE: &str = "merged_object_scene.ply";
pub const REPORT_FILE: &str = "report.json";
pub const TRACE_FILE: &str = "error_trace.csv";
pub const STATS_FILE: &str = "distance_stats.csv";
pub const DISTANCES_FILE: &str = "distances.ply";
pub const ALIGNMENT_FILE: &str = "alignment.txt";
pub const TRANSFORMS_DIR: &str = "transforms";

/// Points drawn for [`REFERENCE_FILE`].
const REFERENCE_SAMPLES: usize = 30_000;
/// Neighbourhood for normal estimation on loaded clouds.
const NORMAL_K: usize = 12;
/// Marker clouds smaller than this are treated as "marker not visible".
const MIN_MARKER_POINTS: usize = 100;

/// Seed salts keeping the per-stage RNG streams apart.
const SALT_NOISE: u64 = 0x4e6f_6973;
const SALT_REFERENCE: u64 = 0x5265_6600;
const SALT_DETECT: u64 = 0xde7e_c700;

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Renders the configured scene and writes the dataset into
/// `config.output_dir`. Returns the manifest path.
pub fn run_generate(config: &RunConfig) -> Result<PathBuf> {
    config.validate()?;
    let scene = config
        .scene
        .as_ref()
        .ok_or_else(|| Error::Config("generate needs a scene; got an input_dir run".into()))?;
    let seed = config.seed();
    let out = &config.output_dir;
    create_dir(out)?;

    let model = if scene.isotropic_noise {
        NoiseModel::Isotropic
    } else {
        NoiseModel::AlongRay
    };
    let mut entries = Vec::with_capacity(scene.turn.n_views);
    for v in 0..scene.turn.n_views {
        let clean = render_view(scene, v, mix_seed(seed, v as u64))?;
        let view = add_noise_with_model(
            &clean,
            scene.noise_sigma,
            model,
            mix_seed(seed, SALT_NOISE + v as u64),
        );

        let dir_name = format!("view_{v:03}");
        create_dir(&out.join(&dir_name))?;
        let mut marker_clouds = Vec::with_capacity(view.marker_clouds.len());
        for (m, cloud) in view.marker_clouds.iter().enumerate() {
            let rel = PathBuf::from(&dir_name).join(format!("marker_{m}.ply"));
            write_ply(cloud, &out.join(&rel), PlyFormat::BinaryLittleEndian)?;
            marker_clouds.push(rel);
        }
        let object_rel = PathBuf::from(&dir_name).join("object.ply");
        let object = view.object_cloud.clone().unwrap_or_default();
        write_ply(&object, &out.join(&object_rel), PlyFormat::BinaryLittleEndian)?;
        let gt_rel = PathBuf::from(&dir_name).join("gt.txt");
        write_transform(&view.ground_truth, &out.join(&gt_rel))?;

        entries.push(ViewEntry {
            marker_clouds,
            object_cloud: object_rel,
            ground_truth: Some(gt_rel),
        });
    }

    if let Some(object) = &scene.object {
        let mesh = generate_mesh(object.shape, object.size).transformed(&object.pose.to_transform());
        let reference = sample_surface(&mesh, REFERENCE_SAMPLES, mix_seed(seed, SALT_REFERENCE));
        write_ply(
            &reference,
            &out.join(REFERENCE_FILE),
            PlyFormat::BinaryLittleEndian,
        )?;
    }

    let manifest = ViewManifest { views: entries };
    let manifest_path = out.join(MANIFEST_FILE);
    manifest.save(&manifest_path)?;
    config.save(&out.join(CONFIG_FILE))?;
    Ok(manifest_path)
}

/// What [`run_register`] wrote, plus the in-memory results.
#[derive(Debug, Clone)]
pub struct RegisterArtifacts {
    pub transforms: Vec<RigidTransform>,
    pub converged: bool,
    /// Merged object cloud in the registration frame.
    pub merged: PointCloud,
    pub output_dir: PathBuf,
}

/// Structured summary written as [`REPORT_FILE`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub backend: Method,
    pub converged: bool,
    pub n_views: usize,
    pub transforms: Vec<RigidTransform>,
    /// Multi-view solver internals; absent for the ICP backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registration: Option<RegistrationReport>,
}

/// Registers the dataset under `config.input_dir` with the configured
/// backend and writes transforms, merged clouds and the report into
/// `config.output_dir`.
///
/// A registration that ran out of iterations still writes everything and
/// comes back with `converged = false`; hard failures (unreadable files,
/// unsatisfiable constraints) return an error without artefacts.
pub fn run_register(config: &RunConfig) -> Result<RegisterArtifacts> {
    config.validate()?;
    let input = config.input_dir.as_ref().ok_or_else(|| {
        Error::Config("register needs an input_dir; generate a dataset first".into())
    })?;
    let seed = config.seed();
    let manifest = ViewManifest::load(&input.join(MANIFEST_FILE))?;
    let n_views = manifest.views.len();
    let out = &config.output_dir;
    create_dir(out)?;

    let ransac = RansacParams::default();
    let mut view_planes = Vec::with_capacity(n_views);
    let mut marker_merged = Vec::with_capacity(n_views);
    let mut object_views = Vec::with_capacity(n_views);
    for (v, entry) in manifest.views.iter().enumerate() {
        let mut planes = Vec::new();
        let mut clouds = Vec::new();
        for (m, path) in entry.marker_clouds.iter().enumerate() {
            let raw = read_ply(path)?;
            if raw.len() < MIN_MARKER_POINTS {
                continue;
            }
            let cloud = estimate_normals(&raw, NORMAL_K, &Point3::origin())
                .map_err(|e| e.in_view(v, m))?;
            let salt = SALT_DETECT + (v * 64 + m) as u64;
            planes.extend(
                detect_marker_planes(&cloud, &config.constraints, mix_seed(seed, salt), &ransac)
                    .map_err(|e| e.in_view(v, m))?,
            );
            clouds.push(cloud);
        }
        view_planes.push(ViewPlanes {
            view_index: v,
            planes,
        });
        marker_merged.push(PointCloud::concat(&clouds));
        object_views.push(read_ply(&entry.object_cloud)?);
    }

    let report = match config.backend {
        Method::Mumar => {
            let fallback_ready = marker_merged.iter().all(|c| c.normals.is_some());
            let clouds = fallback_ready.then_some(marker_merged.as_slice());
            let registration = register_sequence(&view_planes, clouds, &config.registration)?;
            let mut trace = String::from("window,iteration,rot_deg,trans\n");
            for s in &registration.error_trace {
                writeln!(trace, "{},{},{},{}", s.window, s.iteration, s.rot_deg, s.trans)
                    .expect("writing to a String cannot fail");
            }
            std::fs::write(out.join(TRACE_FILE), trace)
                .map_err(|e| Error::io(out.join(TRACE_FILE), e))?;
            RunReport {
                backend: Method::Mumar,
                converged: registration.converged,
                n_views,
                transforms: registration.transforms.clone(),
                registration: Some(registration),
            }
        }
        Method::Icp => {
            let with_normals: Vec<PointCloud> = object_views
                .iter()
                .enumerate()
                .map(|(v, cloud)| {
                    estimate_normals(cloud, NORMAL_K, &Point3::origin())
                        .map_err(|e| e.in_view(v, 0))
                })
                .collect::<Result<_>>()?;
            let result = icp_register_sequence(&with_normals, &config.icp)?;
            RunReport {
                backend: Method::Icp,
                converged: result.converged,
                n_views,
                transforms: result.transforms,
                registration: None,
            }
        }
    };

    let transforms_dir = out.join(TRANSFORMS_DIR);
    create_dir(&transforms_dir)?;
    for (v, t) in report.transforms.iter().enumerate() {
        write_transform(t, &transforms_dir.join(format!("view_{v:03}.txt")))?;
    }

    let merged = transform_object(&object_views, &report.transforms)?;
    write_ply(&merged, &out.join(MERGED_FILE), PlyFormat::BinaryLittleEndian)?;

    if let Some(gt_path) = &manifest.views[0].ground_truth {
        // Anchor the registration's free gauge at view 0: carry the merged
        // cloud back through view 0's solved pose, then into the scene with
        // its ground truth.
        let gt0 = read_transform(gt_path)?;
        let anchor = gt0.compose(&report.transforms[0].inverse());
        write_ply(
            &anchor.transform_cloud(&merged),
            &out.join(MERGED_SCENE_FILE),
            PlyFormat::BinaryLittleEndian,
        )?;
    }

    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Config(format!("report serialisation failed: {e}")))?;
    std::fs::write(out.join(REPORT_FILE), json + "\n")
        .map_err(|e| Error::io(out.join(REPORT_FILE), e))?;
    config.save(&out.join(CONFIG_FILE))?;

    Ok(RegisterArtifacts {
        transforms: report.transforms,
        converged: report.converged,
        merged,
        output_dir: out.clone(),
    })
}

/// Inputs for [`run_evaluate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateRequest {
    /// Registered (merged) cloud to score.
    pub result: PathBuf,
    /// Reference cloud, e.g. a dataset's `reference_object.ply`.
    pub reference: PathBuf,
    /// Remove any global pose offset with ICP before measuring.
    #[serde(default)]
    pub fine_align: bool,
    #[serde(default)]
    pub icp: IcpOptions,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct EvaluationArtifacts {
    pub stats: DistanceStats,
    /// Transform applied by fine alignment, when requested.
    pub alignment: Option<RigidTransform>,
    pub output_dir: PathBuf,
}

/// Measures a result cloud against a reference cloud: optional fine
/// alignment, then directed distance statistics. Writes a one-row stats CSV
/// and the (aligned) result recoloured with per-point distances.
pub fn run_evaluate(request: &EvaluateRequest) -> Result<EvaluationArtifacts> {
    let result = read_ply(&request.result)?;
    let reference = read_ply(&request.reference)?;
    let out = &request.output_dir;
    create_dir(out)?;

    let (scored, alignment) = if request.fine_align {
        let (cloud, transform) = fine_align(&result, Reference::Cloud(&reference), &request.icp)?;
        (cloud, Some(transform))
    } else {
        (result, None)
    };

    let distances = per_point_distances(&scored, Reference::Cloud(&reference))?;
    let stats = DistanceStats::from_distances(&distances)?;

    let csv = format!(
        "min,max,mean,rms,n_samples\n{},{},{},{},{}\n",
        stats.min, stats.max, stats.mean, stats.rms, stats.n_samples
    );
    std::fs::write(out.join(STATS_FILE), csv).map_err(|e| Error::io(out.join(STATS_FILE), e))?;
    write_ply_with_distances(
        &scored,
        &distances,
        &out.join(DISTANCES_FILE),
        PlyFormat::BinaryLittleEndian,
    )?;
    if let Some(transform) = &alignment {
        write_transform(transform, &out.join(ALIGNMENT_FILE))?;
    }

    Ok(EvaluationArtifacts {
        stats,
        alignment,
        output_dir: out.clone(),
    })
}

/// Re-encodes a PLY file, e.g. binary to ASCII for inspection.
pub fn run_export(input: &Path, output: &Path, format: PlyFormat) -> Result<()> {
    let cloud = read_ply(input)?;
    if let Some(parent) = output.parent() {
        if !parent.as_os_str().is_empty() {
            create_dir(parent)?;
        }
    }
    write_ply(&cloud, output, format)
}
