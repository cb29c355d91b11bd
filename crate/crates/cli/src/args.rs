use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hcwand_core::scan::AnalysisMode;

#[derive(Debug, Parser)]
#[command(name = "hcwand", version, about = "Boundary laws of the hard-core wand model on Cayley trees")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate the solutions at one activity
    Solve(SolveArgs),
    /// Sweep the activity and locate the critical value
    Scan(ScanArgs),
    /// Tabulate the parametrised curve λ(t)
    Curve(CurveArgs),
    /// Run the exact polynomial and binomial checks
    Verify(VerifyArgs),
    /// Iterate the recursion on a finite tree
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryKind {
    Constant,
    Exact,
    Noisy,
    Spike,
}

fn parse_mode(s: &str) -> Result<AnalysisMode, String> {
    s.parse().map_err(|_| {
        format!("unknown mode {s}; expected one of ti-q2, ti-q4, bip-q2, bip-q4-I3, bip-q4-I4")
    })
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    /// Write to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// key=value file supplying any flag; the command line wins
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long, value_parser = parse_mode)]
    pub mode: AnalysisMode,
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub lambda: f64,
    /// Even activity λ₂ (γ for the bipartite modes)
    #[arg(long, alias = "gamma")]
    pub lambda2: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[arg(long, value_parser = parse_mode)]
    pub mode: AnalysisMode,
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub lambda_min: f64,
    #[arg(long)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = 201)]
    pub steps: usize,
    #[arg(long, alias = "gamma")]
    pub lambda2: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub lambda2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub t_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 201)]
    pub steps: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 2)]
    pub k_min: u32,
    #[arg(long, default_value_t = 12)]
    pub k_max: u32,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Selects the activity period: 2 for ti-q2/bip-q2, 4 otherwise
    #[arg(long, value_parser = parse_mode, default_value = "bip-q2")]
    pub mode: AnalysisMode,
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, alias = "gamma")]
    pub lambda2: Option<f64>,
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    /// Spin support bound M
    #[arg(long, default_value_t = 50)]
    pub truncate: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "noisy")]
    pub boundary: BoundaryKind,
    /// Entries above this bound are clipped and the run reported as diverged
    #[arg(long, default_value_t = 1e300)]
    pub clip: f64,
    /// Noise amplitude (noisy) or spike factor (spike)
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[command(flatten)]
    pub output: Output,
}

/// Turns `key=value` lines into `--key value` arguments. Blank lines and
/// lines starting with `#` are skipped.
pub fn config_args(text: &str) -> anyhow::Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key=value, got {line:?}", n + 1);
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key == "config" {
            bail!("config line {}: nested config files are not supported", n + 1);
        }
        out.push(format!("--{key}").into());
        out.push(value.trim().into());
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return iter.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Splices the config file's flags in front of the command-line flags, so
/// that later (command-line) values override them.
pub fn expand_config(args: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let extra = config_args(&text)?;
    let split = args.len().min(2);
    let mut out: Vec<OsString> = args[..split].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[split..]);
    Ok(out)
}
