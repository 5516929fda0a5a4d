//! Run configuration: one JSON document pins an entire pipeline run.
//!
//! A run either renders a synthetic scene or consumes an existing dataset
//! directory, never both. The exact configuration used — defaults resolved,
//! seed included — is written next to the outputs, so any artefact can be
//! reproduced from the files alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detection::MarkerConstraints;
use crate::error::{Error, Result};
use crate::evaluation::Method;
use crate::icp::IcpOptions;
use crate::registration::RegistrationOptions;
use crate::synth::{default_benchmark_scene, MarkerShape, SceneSpec};

/// Environment variable that overrides `output_dir`; no other field can be
/// overridden from the environment.
pub const OUTPUT_DIR_ENV: &str = "MUMAR_OUTPUT_DIR";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Synthetic scene to render.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneSpec>,
    /// Existing dataset directory holding a `manifest.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_dir: Option<PathBuf>,
    /// Marker geometry the plane detector may assume.
    pub constraints: MarkerConstraints,
    /// Multi-view solver settings, used by the `mumar` backend.
    #[serde(default)]
    pub registration: RegistrationOptions,
    /// Baseline settings, used by the `icp` backend.
    #[serde(default)]
    pub icp: IcpOptions,
    #[serde(default = "default_backend")]
    pub backend: Method,
    /// Base seed for every randomised stage; required when generating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
    pub output_dir: PathBuf,
}

fn default_backend() -> Method {
    Method::Mumar
}

impl RunConfig {
    /// The standard benchmark run: four cube markers around the given
    /// object, 60 views of 6°, cube constraints.
    pub fn benchmark(
        object: MarkerShape,
        noise_sigma: f64,
        rng_seed: u64,
        output_dir: impl Into<PathBuf>,
    ) -> RunConfig {
        let mut scene = default_benchmark_scene(object);
        scene.noise_sigma = noise_sigma;
        let edge = scene.marker_edge();
        RunConfig {
            scene: Some(scene),
            input_dir: None,
            constraints: MarkerConstraints::cube(edge),
            registration: RegistrationOptions::for_marker_edge(edge),
            icp: IcpOptions::default(),
            backend: Method::Mumar,
            rng_seed: Some(rng_seed),
            output_dir: output_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.scene, &self.input_dir) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either a scene or an input_dir, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "either a scene or an input_dir is required".into(),
                ))
            }
            (Some(scene), None) => {
                scene.validate()?;
                if self.rng_seed.is_none() {
                    return Err(Error::Config(
                        "synthetic runs need an rng_seed for reproducibility".into(),
                    ));
                }
            }
            (None, Some(_)) => {}
        }
        self.constraints.validate()?;
        self.registration.validate()?;
        self.icp.validate()?;
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::Config("output_dir must not be empty".into()));
        }
        Ok(())
    }

    /// The base seed, defaulting to 0 for dataset-driven runs that did not
    /// set one.
    pub fn seed(&self) -> u64 {
        self.rng_seed.unwrap_or(0)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: bad run config: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("config serialisation failed: {e}")))?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    /// Applies the [`OUTPUT_DIR_ENV`] override when the variable is set and
    /// non-empty.
    pub fn apply_output_override(&mut self) {
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_config_is_valid_and_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig::benchmark(MarkerShape::Pyramid, 0.002, 7, dir.path().join("out"));
        config.validate().unwrap();

        let path = dir.path().join("config.json");
        config.save(&path).unwrap();
        let loaded = RunConfig::load(&path).unwrap();
        assert_eq!(
            serde_json::to_value(&config).unwrap(),
            serde_json::to_value(&loaded).unwrap()
        );
        assert_eq!(loaded.seed(), 7);
    }

    #[test]
    fn scene_and_input_are_mutually_exclusive() {
        let mut both = RunConfig::benchmark(MarkerShape::Cube, 0.0, 1, "out");
        both.input_dir = Some(PathBuf::from("dataset"));
        assert!(both.validate().is_err());

        let mut neither = RunConfig::benchmark(MarkerShape::Cube, 0.0, 1, "out");
        neither.scene = None;
        assert!(neither.validate().is_err());

        let mut input_only = neither.clone();
        input_only.input_dir = Some(PathBuf::from("dataset"));
        input_only.rng_seed = None;
        input_only.validate().unwrap();
    }

    #[test]
    fn synthetic_runs_require_a_seed() {
        let mut config = RunConfig::benchmark(MarkerShape::Cube, 0.0, 1, "out");
        config.rng_seed = None;
        assert!(config.validate().is_err());
    }

    #[test]
    fn nested_options_are_validated() {
        let mut config = RunConfig::benchmark(MarkerShape::Cube, 0.0, 1, "out");
        config.icp.rejection_fraction = 1.5;
        assert!(config.validate().is_err());

        let mut config = RunConfig::benchmark(MarkerShape::Cube, 0.0, 1, "out");
        config.output_dir = PathBuf::new();
        assert!(config.validate().is_err());

        let mut config = RunConfig::benchmark(MarkerShape::Cube, 0.0, 1, "out");
        config.scene.as_mut().unwrap().density = -1.0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn output_override_comes_from_the_environment() {
        let mut config = RunConfig::benchmark(MarkerShape::Cube, 0.0, 1, "out");
        std::env::remove_var(OUTPUT_DIR_ENV);
        config.apply_output_override();
        assert_eq!(config.output_dir, PathBuf::from("out"));
        std::env::set_var(OUTPUT_DIR_ENV, "elsewhere");
        config.apply_output_override();
        std::env::remove_var(OUTPUT_DIR_ENV);
        assert_eq!(config.output_dir, PathBuf::from("elsewhere"));
    }
}
