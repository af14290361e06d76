use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "dynint", version, about = "Numerical integrability certification for maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Catalog entries with parameters and expected outcomes.
    List,
    /// Check the integrability conditions at sampled points.
    Certify,
    /// Lift to the cotangent bundle and check symplecticity and involution.
    LiftCertify,
    /// Iterate a point.
    Orbit,
    /// Lyapunov spectrum along an orbit.
    Lyapunov,
    /// Rotation number by windowed lift averages.
    Rotation,
    /// Periodic points by Newton from sampled starts.
    Periodic,
    /// Drift of the integrals along an orbit.
    Drift,
    /// Flow times whose composed flows reproduce one step of the map.
    Translation,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::List => "list",
            Command::Certify => "certify",
            Command::LiftCertify => "lift-certify",
            Command::Orbit => "orbit",
            Command::Lyapunov => "lyapunov",
            Command::Rotation => "rotation",
            Command::Periodic => "periodic",
            Command::Drift => "drift",
            Command::Translation => "translation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Every option is optional so that a config file can fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Catalog map name.
    #[arg(long, global = true)]
    pub map: Option<String>,
    /// Map parameter as name=value; repeatable.
    #[arg(long = "param", global = true, value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// JSON structure {dim, fields, integrals} replacing the catalog one.
    #[arg(long, global = true)]
    pub structure_file: Option<PathBuf>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated flow times; empty disables flow checks.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub flow_times: Option<String>,
    /// Orbit length.
    #[arg(short = 'N', long = "iterations", global = true)]
    pub iterations: Option<usize>,
    /// Comma-separated start point.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Period for `periodic`.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Newton starts for `periodic`.
    #[arg(long, global = true)]
    pub seeds: Option<usize>,
    #[arg(long, global = true)]
    pub windows: Option<usize>,
    /// Center of the angular observable for `rotation` on non-circle maps.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub center: Option<String>,
    /// One-based coordinate pair `i,j` for the angular observable.
    #[arg(long, global = true)]
    pub plane: Option<String>,
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// JSON config file; explicit flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub algebraic_tol: Option<f64>,
    #[arg(long, global = true)]
    pub flow_tol: Option<f64>,
    #[arg(long, global = true)]
    pub rank_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub ae_fraction: Option<f64>,
    /// Record wall time in the report; output is then no longer reproducible.
    #[arg(long, global = true)]
    pub timing: bool,
}
