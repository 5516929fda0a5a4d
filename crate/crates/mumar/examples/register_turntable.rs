//! Sliding-window registration of a turntable sequence, stage by stage, in
//! process — the same path the `register` subcommand takes, opened up so
//! each intermediate is visible.
//!
//! A scene with four cube markers around an object is rendered from twelve
//! turntable stops. Per view, the marker faces are detected as planes; the
//! solver then registers overlapping four-view windows of those planes and
//! chains the increments into per-view transforms. Ground truth is known
//! here, so the result can be scored directly.
//!
//! ```text
//! cargo run --release --example register_turntable
//! ```

use mumar::correspondence::ViewPlanes;
use mumar::detection::{detect_marker_planes, MarkerConstraints, RansacParams};
use mumar::geometry::{estimate_normals, Point3, PointCloud};
use mumar::registration::{register_sequence, transform_object, RegistrationOptions};
use mumar::synth::{default_benchmark_scene, mix_seed, render_view, MarkerShape, TurnSpec};

const SEED: u64 = 11;

fn main() -> mumar::Result<()> {
    let mut spec = default_benchmark_scene(MarkerShape::Cube);
    spec.turn = TurnSpec {
        n_views: 12,
        step_deg: 6.0,
    };
    spec.noise_sigma = 0.002;
    println!(
        "scene: {} markers, turntable {} views × {}°, noise σ = {}",
        spec.markers.len(),
        spec.turn.n_views,
        spec.turn.step_deg,
        spec.noise_sigma
    );

    // Stage 1: render and detect. Each view contributes one ViewPlanes set
    // (all detected marker faces, in that view's camera frame), the merged
    // marker points for the ICP fallback, and the object points to carry.
    let constraints = MarkerConstraints::cube(spec.marker_edge());
    let mut views = Vec::new();
    let mut marker_clouds = Vec::new();
    let mut object_views = Vec::new();
    for v in 0..spec.turn.n_views {
        let view = render_view(&spec, v, mix_seed(SEED, v as u64))?;
        let mut planes = Vec::new();
        let mut clouds = Vec::new();
        for (m, raw) in view.marker_clouds.iter().enumerate() {
            let cloud = estimate_normals(raw, 12, &Point3::origin())?;
            let seed = mix_seed(SEED, 1000 + (v * 64 + m) as u64);
            planes.extend(detect_marker_planes(
                &cloud,
                &constraints,
                seed,
                &RansacParams::default(),
            )?);
            clouds.push(cloud);
        }
        println!("view {v:2}: {} marker planes", planes.len());
        views.push(ViewPlanes {
            view_index: v,
            planes,
        });
        marker_clouds.push(PointCloud::concat(&clouds));
        object_views.push(view.object_cloud.expect("scene has an object"));
    }

    // Stage 2: the sliding-window solve.
    let options = RegistrationOptions::for_marker_edge(spec.marker_edge());
    let report = register_sequence(&views, Some(&marker_clouds), &options)?;
    println!(
        "\nsolver: {} windows, converged: {}, icp fallback used: {}",
        report.n_windows, report.converged, report.fallback_icp_used
    );

    // The error trace records the window-level error before every sweep;
    // watching one window shrink shows the joint refinement at work.
    let first: Vec<_> = report.error_trace.iter().filter(|s| s.window == 0).collect();
    println!("window 0 error per sweep (rotation °, translation):");
    for sample in &first {
        println!(
            "  sweep {:2}: {:8.4}°  {:.6}",
            sample.iteration, sample.rot_deg, sample.trans
        );
    }

    // Stage 3: score against ground truth. The solver's frame is arbitrary,
    // so anchor it to the scene through view 0 before comparing.
    let truth: Vec<_> = (0..spec.turn.n_views)
        .map(|v| render_view(&spec, v, mix_seed(SEED, v as u64)).map(|view| view.ground_truth))
        .collect::<mumar::Result<_>>()?;
    let anchor = truth[0].compose(&report.transforms[0].inverse());
    println!("\nper-view pose error vs ground truth:");
    for (v, (estimate, gt)) in report.transforms.iter().zip(&truth).enumerate() {
        let gap = gt.inverse().compose(&anchor.compose(estimate));
        println!(
            "  view {v:2}: rotation {:.2e}°, translation {:.2e}",
            gap.rotation_angle_deg(),
            gap.translation.norm()
        );
    }

    // Stage 4: carry the object along its view transforms into one cloud.
    let merged = transform_object(&object_views, &report.transforms)?;
    println!("\nmerged object cloud: {} points", merged.len());

    Ok(())
}
