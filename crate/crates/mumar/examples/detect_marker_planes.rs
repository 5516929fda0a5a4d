//! Marker plane detection on a single corner view of a cube.
//!
//! Renders roughly what a range camera sees when it looks at a cube corner
//! — three faces at mutual right angles — adds increasing sensor noise, and
//! runs the constrained RANSAC detector on each version. The known marker
//! geometry (face angles, edge length) is what lets the detector reject
//! plane triples that a free-for-all fit would happily return.
//!
//! ```text
//! cargo run --release --example detect_marker_planes
//! ```

use mumar::detection::{check_constraints, detect_marker_planes, MarkerConstraints, RansacParams};
use mumar::geometry::{estimate_normals, folded_angle_deg, Point3};
use mumar::synth::{add_noise, mix_seed, render_view, MarkerShape, SceneSpec};

fn main() -> mumar::Result<()> {
    let spec = SceneSpec::single_marker(MarkerShape::Cube, 1.0, 2000.0);
    let clean = render_view(&spec, 0, mix_seed(7, 0))?;
    println!(
        "corner view of a unit cube: {} sampled points, 3 faces visible",
        clean.marker_clouds[0].len()
    );

    let constraints = MarkerConstraints::cube(1.0);
    println!(
        "constraints: pairwise face angles {:?}° ± {}°, inlier distance {}\n",
        constraints.pairwise_angles_deg, constraints.angle_tolerance_deg,
        constraints.inlier_distance
    );

    for (case, sigma) in [0.0, 0.002, 0.005].into_iter().enumerate() {
        let view = add_noise(&clean, sigma, mix_seed(7, 100 + case as u64));

        // The renderer produces bare points, as a real sensor would; local
        // PCA normals, oriented towards the camera at the origin, come first.
        let cloud = estimate_normals(&view.marker_clouds[0], 12, &Point3::origin())?;

        let planes = detect_marker_planes(&cloud, &constraints, 7, &RansacParams::default())?;
        println!("noise σ = {sigma}: {} planes detected", planes.len());
        for (i, plane) in planes.iter().enumerate() {
            let n = plane.normal;
            println!(
                "  plane {i}: normal [{:+.3} {:+.3} {:+.3}], centroid [{:+.3} {:+.3} {:+.3}]",
                n.x, n.y, n.z, plane.centroid.x, plane.centroid.y, plane.centroid.z
            );
        }
        for i in 0..planes.len() {
            for j in (i + 1)..planes.len() {
                let angle = folded_angle_deg(&planes[i].normal, &planes[j].normal);
                println!("  planes {i}–{j}: {angle:.4}° apart");
            }
        }
        println!(
            "  marker constraints satisfied: {}\n",
            check_constraints(&planes, &constraints)
        );
    }

    Ok(())
}
