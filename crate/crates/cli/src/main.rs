//! `geoloss` command-line tool.
//!
//! Exit codes: 0 success, 1 invalid input (flags, files, specs), 2 failed
//! computation. Failures print one JSON object on stderr; results go to
//! stdout as JSON or CSV only.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use geoloss::GeoError;

#[derive(Debug, Parser)]
#[command(
    name = "geoloss",
    version,
    about = "Geometric segmentation losses, transforms and lesion metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformOp {
    /// Gradient magnitude of the first-order operator.
    Fog,
    FogX,
    FogY,
    FogZ,
    /// Discrete Laplacian.
    Sog,
    Dtm,
    DtmSigned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StencilArg {
    Central,
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Replicate,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply a geometric operator to a volume.
    Transform {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        op: TransformOp,
        #[arg(long, value_enum, default_value = "central")]
        stencil: StencilArg,
        #[arg(long, value_enum, default_value = "replicate")]
        boundary: BoundaryArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a loss document on a prediction and ground truth.
    Loss {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// Also write the gradient with respect to the prediction.
        #[arg(long)]
        grad: Option<PathBuf>,
        /// Training progress in [0, 1] for scheduled weights.
        #[arg(long, default_value_t = 0.0)]
        progress: f64,
    },
    /// Compare analytic gradients with central differences.
    GradCheck {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        /// Maximum allowed relative error; exceeding it exits with 2.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long)]
        max_voxels: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        progress: f64,
    },
    /// Voxel and lesion-wise metrics at one threshold.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value_t = 26)]
        connectivity: u32,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Metrics over a list of thresholds.
    Sweep {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// `start..end:step` (inclusive) or a comma-separated list.
        #[arg(long, default_value = "0.1..0.9:0.1")]
        thresholds: String,
        #[arg(long, default_value_t = 26)]
        connectivity: u32,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Generate a synthetic lesion phantom, optionally with a perturbed map.
    Phantom {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Optimise a probability map directly against a ground-truth mask.
    Optimize {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_prefix: PathBuf,
        /// Start from this probability map instead of the configured init alone.
        #[arg(long)]
        init_map: Option<PathBuf>,
    },
}

/// A failed invocation, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Invalid { kind: String, message: String },
    Computation { kind: String, message: String },
}

impl Failure {
    pub fn invalid(kind: &str, message: impl Into<String>) -> Self {
        Failure::Invalid {
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn computation(kind: &str, message: impl Into<String>) -> Self {
        Failure::Computation {
            kind: kind.into(),
            message: message.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid { .. } => 1,
            Failure::Computation { .. } => 2,
        }
    }

    fn render(&self) -> String {
        let (kind, message) = match self {
            Failure::Invalid { kind, message } | Failure::Computation { kind, message } => (kind, message),
        };
        json!({"error": kind, "message": message, "exit_code": self.exit_code()}).to_string()
    }
}

impl From<GeoError> for Failure {
    fn from(e: GeoError) -> Self {
        let computational = matches!(
            e,
            GeoError::NonFinite { .. } | GeoError::Diverged { .. } | GeoError::InvariantViolation(_)
        );
        if computational {
            Failure::computation(e.kind(), e.to_string())
        } else {
            Failure::invalid(e.kind(), e.to_string())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "{}",
                Failure::invalid("usage", first.trim_start_matches("error: ")).render()
            );
            return ExitCode::from(1);
        }
    };

    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.render());
            ExitCode::from(f.exit_code())
        }
    }
}
