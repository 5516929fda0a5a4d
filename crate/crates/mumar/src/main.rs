//! Command-line front end: thin argument parsing and exit-code mapping over
//! [`mumar::pipeline`]. Exit codes are stable: 0 success, 2 registration or
//! alignment did not converge, 3 bad input or configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mumar::config::{RunConfig, OUTPUT_DIR_ENV};
use mumar::evaluation::Method;
use mumar::io::PlyFormat;
use mumar::pipeline::{self, EvaluateRequest, CONFIG_FILE};
use mumar::synth::MarkerShape;
use mumar::Error;

#[derive(Parser)]
#[command(
    name = "mumar",
    version,
    about = "Marker-based registration of turntable point-cloud sequences",
    after_help = "The environment variable MUMAR_OUTPUT_DIR overrides every --output flag."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic turntable dataset to disk.
    Generate(GenerateArgs),
    /// Register a dataset and merge the object views.
    Register(RegisterArgs),
    /// Score a merged cloud against a reference cloud.
    Evaluate(EvaluateArgs),
    /// Re-encode a PLY file, e.g. binary to ASCII for inspection.
    Export(ExportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Full run configuration (JSON). Mutually exclusive with --object.
    #[arg(long, conflicts_with = "object")]
    config: Option<PathBuf>,
    /// Use the standard benchmark scene with this object.
    #[arg(long, value_enum)]
    object: Option<ShapeArg>,
    /// Sensor noise sigma for the benchmark scene, in scene units.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RegisterArgs {
    /// Full run configuration (JSON). Mutually exclusive with --input.
    #[arg(long, conflicts_with = "input")]
    config: Option<PathBuf>,
    /// Dataset directory; its own run_config.json supplies constraints and
    /// solver settings when present.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Registered (merged) cloud to score.
    #[arg(long)]
    result: PathBuf,
    /// Reference cloud to measure against.
    #[arg(long)]
    reference: PathBuf,
    /// Remove any global pose offset with ICP before measuring.
    #[arg(long)]
    fine_align: bool,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Ascii)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Cube,
    Pyramid,
    DoublePyramid,
}

impl From<ShapeArg> for MarkerShape {
    fn from(arg: ShapeArg) -> MarkerShape {
        match arg {
            ShapeArg::Cube => MarkerShape::Cube,
            ShapeArg::Pyramid => MarkerShape::Pyramid,
            ShapeArg::DoublePyramid => MarkerShape::DoublePyramid,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Mumar,
    Icp,
}

impl From<BackendArg> for Method {
    fn from(arg: BackendArg) -> Method {
        match arg {
            BackendArg::Mumar => Method::Mumar,
            BackendArg::Icp => Method::Icp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum FormatArg {
    Ascii,
    Binary,
}

impl From<FormatArg> for PlyFormat {
    fn from(arg: FormatArg) -> PlyFormat {
        match arg {
            FormatArg::Ascii => PlyFormat::Ascii,
            FormatArg::Binary => PlyFormat::BinaryLittleEndian,
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("registration did not converge");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NotConverged => 2,
        Error::ViewContext { source, .. } => exit_code(source),
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Generate(args) => {
            let mut config = match (args.config, args.object) {
                (Some(path), None) => RunConfig::load(&path)?,
                (None, Some(shape)) => RunConfig::benchmark(
                    shape.into(),
                    args.sigma,
                    args.seed.unwrap_or(0),
                    args.output.clone().unwrap_or_else(|| PathBuf::from("dataset")),
                ),
                _ => {
                    return Err(Error::Config(
                        "generate needs either --config or --object".into(),
                    ))
                }
            };
            if let Some(seed) = args.seed {
                config.rng_seed = Some(seed);
            }
            if let Some(output) = args.output {
                config.output_dir = output;
            }
            config.apply_output_override();
            let manifest = pipeline::run_generate(&config)?;
            println!("wrote dataset: {}", manifest.display());
            Ok(true)
        }
        Command::Register(args) => {
            let mut config = match (args.config, &args.input) {
                (Some(path), None) => RunConfig::load(&path)?,
                (None, Some(input)) => dataset_config(input)?,
                _ => {
                    return Err(Error::Config(
                        "register needs either --config or --input".into(),
                    ))
                }
            };
            if let Some(backend) = args.backend {
                config.backend = backend.into();
            }
            if let Some(seed) = args.seed {
                config.rng_seed = Some(seed);
            }
            if let Some(output) = args.output {
                config.output_dir = output;
            }
            config.apply_output_override();
            let artifacts = pipeline::run_register(&config)?;
            println!(
                "registered {} views with backend {}: {}",
                artifacts.transforms.len(),
                config.backend.as_str(),
                if artifacts.converged {
                    "converged"
                } else {
                    "did not converge"
                }
            );
            println!("artefacts in {}", artifacts.output_dir.display());
            Ok(artifacts.converged)
        }
        Command::Evaluate(args) => {
            let mut request = EvaluateRequest {
                result: args.result,
                reference: args.reference,
                fine_align: args.fine_align,
                icp: Default::default(),
                output_dir: args.output,
            };
            if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
                if !dir.is_empty() {
                    request.output_dir = PathBuf::from(dir);
                }
            }
            let artifacts = pipeline::run_evaluate(&request)?;
            let s = artifacts.stats;
            println!(
                "min {:.6}  max {:.6}  mean {:.6}  rms {:.6}  over {} points",
                s.min, s.max, s.mean, s.rms, s.n_samples
            );
            println!("artefacts in {}", artifacts.output_dir.display());
            Ok(true)
        }
        Command::Export(args) => {
            pipeline::run_export(&args.input, &args.output, args.format.into())?;
            println!("wrote {}", args.output.display());
            Ok(true)
        }
    }
}

/// Register settings for a dataset directory: reuse the configuration the
/// dataset was generated with when it is there, fall back to cube-marker
/// defaults otherwise.
fn dataset_config(input: &PathBuf) -> Result<RunConfig, Error> {
    let stored = input.join(CONFIG_FILE);
    let mut config = if stored.is_file() {
        RunConfig::load(&stored)?
    } else {
        RunConfig::benchmark(MarkerShape::Cube, 0.0, 0, "registered")
    };
    config.scene = None;
    config.input_dir = Some(input.clone());
    config.output_dir = input.join("registered");
    Ok(config)
}
