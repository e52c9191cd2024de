//! `hipmetrics` command-line front end.

mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hipmetrics::io::FormatError;
use hipmetrics::EvaluateError;
use thiserror::Error;

pub use config::{Config, Overrides};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Evaluate(#[from] EvaluateError),
    #[error("{0}")]
    Degenerate(String),
}

impl CliError {
    /// 1 usage or config, 2 input validation, 3 computation degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Format(_) | CliError::Input(_) => 2,
            CliError::Evaluate(e) if e.is_degenerate() => 3,
            CliError::Evaluate(_) => 2,
            CliError::Degenerate(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hipmetrics",
    version,
    about = "Hip landmark heatmaps, FAI angles and agreement statistics"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true, env = "HIPMETRICS_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true)]
    pub tta_views: Option<usize>,
    /// Comma-separated radii in mm.
    #[arg(long, global = true, value_delimiter = ',')]
    pub sdr_radii: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub alpha_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub lce_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Treat unknown annotation fields as errors.
    #[arg(long, global = true)]
    pub strict: bool,
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            sigma: self.sigma,
            tta_views: self.tta_views,
            sdr_radii: self.sdr_radii.clone(),
            alpha_threshold: self.alpha_threshold,
            lce_threshold: self.lce_threshold,
            seed: self.seed,
            restarts: self.restarts,
        }
    }

    /// Config file (if any) with flag overrides applied, validated.
    pub fn resolve(&self) -> Result<Config, CliError> {
        let base = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let cfg = base.apply(&self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write ground-truth heatmap files, one per image.
    Encode {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Write `tta_views` augmented views per image instead of one file.
        #[arg(long)]
        views: bool,
    },
    /// Decode heatmap files into predicted landmarks.
    Decode {
        #[arg(long)]
        heatmaps: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Localisation, agreement and screening report.
    Evaluate {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write Bland–Altman CSV files into this directory.
        #[arg(long)]
        bland_altman_dir: Option<PathBuf>,
    },
    /// Patient-level train/val/test split balanced on α-angle.
    Split {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the split statistics as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Bland–Altman plot data per modality and angle.
    BlandAltman {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Mean ± std of every report cell across runs.
    Summarize {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let cfg = cli.global.resolve()?;
    let mode = if cli.global.strict {
        hipmetrics::io::ReadMode::Strict
    } else {
        hipmetrics::io::ReadMode::Lenient
    };
    match &cli.command {
        Command::Encode {
            annotations,
            out_dir,
            views,
        } => commands::encode(&cfg, mode, annotations, out_dir, *views),
        Command::Decode {
            heatmaps,
            annotations,
            out,
        } => commands::decode(mode, heatmaps, annotations, out),
        Command::Evaluate {
            annotations,
            out,
            bland_altman_dir,
        } => commands::evaluate(&cfg, mode, annotations, out, bland_altman_dir.as_deref()),
        Command::Split {
            annotations,
            out,
            summary,
        } => commands::split(&cfg, mode, annotations, out, summary.as_deref()),
        Command::BlandAltman { annotations, out_dir } => commands::bland_altman(&cfg, mode, annotations, out_dir),
        Command::Summarize { reports, out } => commands::summarize(reports, out.as_deref()),
    }
}
