//! The whole pipeline through the high-level entry points: generate a
//! synthetic turntable dataset on disk, register it, evaluate the merged
//! object against the dataset's reference cloud, and export a PLY for
//! viewing.
//!
//! Everything lands under one directory (first CLI argument, or a fresh
//! directory under the system temp dir) and stays there for inspection:
//!
//! ```text
//! cargo run --release --example end_to_end_pipeline [output_root]
//! ```

use std::path::PathBuf;

use mumar::config::RunConfig;
use mumar::io::PlyFormat;
use mumar::pipeline::{
    run_evaluate, run_export, run_generate, run_register, EvaluateRequest, CONFIG_FILE,
    MERGED_SCENE_FILE, REFERENCE_FILE, STATS_FILE,
};
use mumar::synth::MarkerShape;

fn main() -> mumar::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("mumar_pipeline_example"));
    println!("writing everything under {}", root.display());

    // A cut-down version of the standard benchmark: four cube markers
    // around a cube object, 16 views instead of 60, mild sensor noise.
    let dataset_dir = root.join("dataset");
    let mut config = RunConfig::benchmark(MarkerShape::Cube, 0.002, 42, &dataset_dir);
    config.scene.as_mut().unwrap().turn.n_views = 16;

    println!("\n[1/4] generating {} views...", 16);
    run_generate(&config)?;
    println!("      dataset in {}", dataset_dir.display());
    println!("      (the exact configuration is saved as {CONFIG_FILE})");

    println!("\n[2/4] registering with the marker-plane solver...");
    let mut register = RunConfig::load(&dataset_dir.join(CONFIG_FILE))?;
    register.scene = None;
    register.input_dir = Some(dataset_dir.clone());
    register.output_dir = root.join("registered");
    let registered = run_register(&register)?;
    println!(
        "      converged: {}, merged object cloud: {} points",
        registered.converged,
        registered.merged.len()
    );

    println!("\n[3/4] evaluating against the reference sampling...");
    let evaluation = run_evaluate(&EvaluateRequest {
        result: registered.output_dir.join(MERGED_SCENE_FILE),
        reference: dataset_dir.join(REFERENCE_FILE),
        fine_align: false,
        icp: Default::default(),
        output_dir: root.join("evaluated"),
    })?;
    let stats = &evaluation.stats;
    println!(
        "      directed distances over {} points: mean {:.4}, rms {:.4}, max {:.4}",
        stats.n_samples, stats.mean, stats.rms, stats.max
    );
    println!(
        "      full distribution in {}",
        evaluation.output_dir.join(STATS_FILE).display()
    );

    println!("\n[4/4] exporting the merged cloud as ASCII PLY...");
    let ascii = root.join("merged_ascii.ply");
    run_export(
        &registered.output_dir.join(MERGED_SCENE_FILE),
        &ascii,
        PlyFormat::Ascii,
    )?;
    println!("      viewable copy at {}", ascii.display());

    Ok(())
}
