//! Command-line front end.
//!
//! Every command prints its resolved configuration as `# key = value` lines
//! before any results, so outputs can be reproduced (and fed back through
//! `--config`).

mod commands;
pub mod config;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::PathBuf;

use crate::constellation::Side;
use crate::designer::{DesignCase, NoiseScaling, OptimizeOptions};
use crate::error::{Error, Result};
use crate::rate::CoefficientMode;
use crate::simulator::{ChannelModel, FourthMoment, SchemeKind};

/// Exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit status for I/O failures.
pub const EXIT_IO: i32 = 1;
/// Exit status for invalid arguments.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for infeasible designs and solver failures.
pub const EXIT_NUMERICAL: i32 = 3;
/// Exit status for a sweep in which some, but not all, cells failed.
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ris-ask", version, about = "Optimal ASK constellations for RIS-assisted energy-detection links")]
pub struct Cli {
    /// Flat key = value file with default flag values; command-line flags win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print composite-channel statistics, optionally checked by Monte Carlo.
    #[command(args_override_self = true)]
    Moments(MomentsArgs),
    /// Design an optimal constellation and write it to a file.
    #[command(args_override_self = true)]
    Optimize(OptimizeArgs),
    /// Simulate the SER of one constellation at one SNR.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// SER-versus-SNR sweep of traditional and optimal constellations.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Level tables of traditional and optimal constellations.
    #[command(name = "compare-constellations", args_override_self = true)]
    CompareConstellations(CompareArgs),
}

pub const SUBCOMMANDS: &[&str] = &["moments", "optimize", "simulate", "sweep", "compare-constellations"];

/// Flags that take no value.
pub const BOOL_FLAGS: &[&str] = &["validate", "paper-coefficients", "rescale-noise", "crossover"];

#[derive(Debug, Clone, Args, Serialize)]
pub struct ChannelArgs {
    /// Rician factor of the transmitter-RIS links.
    #[arg(long = "K1", visible_alias = "k1", default_value_t = 0.0, allow_negative_numbers = true)]
    #[serde(rename = "K1")]
    pub k1: f64,
    /// Rician factor of the RIS-receiver links.
    #[arg(long = "K2", visible_alias = "k2", default_value_t = 0.0, allow_negative_numbers = true)]
    #[serde(rename = "K2")]
    pub k2: f64,
    /// Per-link channel power.
    #[arg(long = "sigma-h-sq", default_value_t = 1.0, allow_negative_numbers = true)]
    #[serde(rename = "sigma-h-sq")]
    pub sigma_h_sq: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModulationArgs {
    /// One-sided (nonnegative) or two-sided (signed) ASK.
    #[arg(long, default_value = "one")]
    pub side: Side,
    /// Constellation size.
    #[arg(long = "M", visible_alias = "m", default_value_t = 4)]
    #[serde(rename = "M")]
    pub m: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct OptimizerArgs {
    /// Exact rate functions or the fourth-moment quadratic approximation.
    #[arg(long, default_value = "exact")]
    pub case: DesignCase,
    /// Bisection tolerance on the exponent.
    #[arg(long = "eps-t", default_value_t = 1e-8)]
    pub eps_t: f64,
    /// Tolerance on the scaled average energy.
    #[arg(long = "eps-s", default_value_t = 1e-6)]
    pub eps_s: f64,
    #[arg(long = "max-iterations", default_value_t = 200)]
    pub max_iterations: usize,
    /// Use the published variance coefficients in the fourth-moment case.
    #[arg(long = "paper-coefficients")]
    pub paper_coefficients: bool,
    /// Divide the normalized noise by the energy cap in scaled units.
    #[arg(long = "rescale-noise")]
    pub rescale_noise: bool,
    /// Estimate the channel fourth moment from this many exact draws instead
    /// of the Gaussian-model value.
    #[arg(long = "fourth-moment-draws", value_parser = parse_count_usize)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fourth_moment_draws: Option<usize>,
}

impl OptimizerArgs {
    pub fn options(&self) -> OptimizeOptions {
        OptimizeOptions {
            eps_t: self.eps_t,
            eps_s: self.eps_s,
            max_iterations: self.max_iterations,
            scaling: if self.rescale_noise {
                NoiseScaling::Rescaled
            } else {
                NoiseScaling::Operating
            },
            coefficients: if self.paper_coefficients {
                CoefficientMode::Published
            } else {
                CoefficientMode::Derived
            },
        }
    }

    pub fn fourth_moment(&self) -> FourthMoment {
        match self.fourth_moment_draws {
            Some(draws) => FourthMoment::MonteCarlo { draws },
            None => FourthMoment::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimArgs {
    /// Monte Carlo trials per cell (scientific notation accepted).
    #[arg(long, default_value = "1000000", value_parser = parse_count)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Composite-gain model used for simulation.
    #[arg(long = "channel-model", default_value = "exact")]
    pub channel_model: ChannelModel,
    /// Worker threads.
    #[arg(long, default_value_t = default_workers())]
    pub workers: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct MomentsArgs {
    /// Number of RIS elements.
    #[arg(long = "N", visible_alias = "n", default_value_t = 128)]
    #[serde(rename = "N")]
    pub n: u32,
    #[command(flatten)]
    #[serde(flatten)]
    pub channel: ChannelArgs,
    /// Average SNR in dB at which the noise terms are reported.
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    pub snr: f64,
    /// Modulation whose energy budget sets the average energy.
    #[command(flatten)]
    #[serde(flatten)]
    pub modulation: ModulationArgs,
    /// Check the moments against exact-channel Monte Carlo.
    #[arg(long)]
    pub validate: bool,
    /// Channel draws for `--validate`.
    #[arg(long, default_value = "1000000", value_parser = parse_count)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct OptimizeArgs {
    #[arg(long = "N", visible_alias = "n", default_value_t = 128)]
    #[serde(rename = "N")]
    pub n: u32,
    #[command(flatten)]
    #[serde(flatten)]
    pub channel: ChannelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub modulation: ModulationArgs,
    /// Average SNR in dB.
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    pub snr: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub optimizer: OptimizerArgs,
    /// Seed for the fourth-moment estimate.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output file (default: const_{side}{M}_N{N}_snr{snr}_opt.json).
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    /// Constellation file to simulate; without it the traditional and
    /// optimal designs are built for this cell.
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[arg(long = "N", visible_alias = "n", default_value_t = 128)]
    #[serde(rename = "N")]
    pub n: u32,
    #[command(flatten)]
    #[serde(flatten)]
    pub channel: ChannelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub modulation: ModulationArgs,
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    pub snr: f64,
    /// Schemes to simulate when no input file is given.
    #[arg(long, default_value = "trad,opt", value_delimiter = ',')]
    pub schemes: Vec<SchemeKind>,
    #[command(flatten)]
    #[serde(flatten)]
    pub optimizer: OptimizerArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimArgs,
    /// CSV output file (default: standard output).
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SweepArgs {
    /// Comma-separated RIS sizes.
    #[arg(long = "N", visible_alias = "n", default_value = "64,128,256,512", value_delimiter = ',')]
    #[serde(rename = "N", serialize_with = "ser_list")]
    pub n: Vec<u32>,
    #[command(flatten)]
    #[serde(flatten)]
    pub channel: ChannelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub modulation: ModulationArgs,
    /// SNR grid in dB: start:step:stop (inclusive), a list, or one value.
    #[arg(long, default_value = "0:5:50", allow_hyphen_values = true)]
    pub snr: String,
    #[arg(long, default_value = "trad,opt", value_delimiter = ',')]
    #[serde(serialize_with = "ser_list")]
    pub schemes: Vec<SchemeKind>,
    #[command(flatten)]
    #[serde(flatten)]
    pub optimizer: OptimizerArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimArgs,
    /// Append crossover SNRs per N as comment rows.
    #[arg(long)]
    pub crossover: bool,
    /// CSV output file (default: standard output).
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Directory for per-cell constellation snapshots.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CompareArgs {
    /// Comma-separated constellation sizes.
    #[arg(long = "M", visible_alias = "m", default_value = "4,8", value_delimiter = ',')]
    #[serde(rename = "M", serialize_with = "ser_list")]
    pub m: Vec<usize>,
    #[arg(long = "N", visible_alias = "n", default_value = "128", value_delimiter = ',')]
    #[serde(rename = "N", serialize_with = "ser_list")]
    pub n: Vec<u32>,
    #[arg(long, default_value = "one")]
    pub side: Side,
    #[command(flatten)]
    #[serde(flatten)]
    pub channel: ChannelArgs,
    /// SNR values in dB (same syntax as sweep).
    #[arg(long, default_value = "10,40", allow_hyphen_values = true)]
    pub snr: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub optimizer: OptimizerArgs,
    /// Seed for the fourth-moment estimate.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn ser_list<T: std::fmt::Display, S: serde::Serializer>(v: &[T], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.iter().map(T::to_string).collect::<Vec<_>>().join(","))
}

/// Positive count, written as an integer or in scientific notation (`1e6`).
pub fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return if n > 0 { Ok(n) } else { Err("must be positive".into()) };
    }
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a count"))?;
    if v >= 1.0 && v.fract() == 0.0 && v < 9.2e18 {
        Ok(v as u64)
    } else {
        Err(format!("'{s}' is not a positive integer"))
    }
}

fn parse_count_usize(s: &str) -> std::result::Result<usize, String> {
    parse_count(s).and_then(|n| usize::try_from(n).map_err(|e| e.to_string()))
}

/// Expands an SNR specification: `start:step:stop` (inclusive), a
/// comma-separated list, or a single value.
pub fn parse_snr_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("bad SNR grid '{spec}'"));
    let num = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad);
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if step <= 0.0 || stop < start {
                return Err(bad());
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            if count > 100_000 {
                return Err(bad());
            }
            Ok((0..=count).map(|i| start + i as f64 * step).collect())
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

/// `# key = value` lines for a command's resolved configuration.
pub fn config_lines<T: Serialize>(command: &str, args: &T, config: Option<&str>) -> Vec<String> {
    let mut lines = vec![format!("command = {command}")];
    if let Some(c) = config {
        lines.push(format!("config-file = {c}"));
    }
    if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(args) {
        for (k, v) in map {
            let text = match v {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            lines.push(format!("{k} = {text}"));
        }
    }
    lines
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// status.
pub fn run(mut args: Vec<String>) -> i32 {
    let config = match config::splice(&mut args, SUBCOMMANDS, BOOL_FLAGS) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command, config.as_deref()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_grids() {
        assert_eq!(parse_snr_grid("0:5:50").unwrap().len(), 11);
        assert_eq!(parse_snr_grid("0:10:25").unwrap(), vec![0.0, 10.0, 20.0]);
        assert_eq!(parse_snr_grid("-10:0.1:-9.7").unwrap().len(), 4);
        assert_eq!(parse_snr_grid("10,40").unwrap(), vec![10.0, 40.0]);
        assert_eq!(parse_snr_grid("20").unwrap(), vec![20.0]);
        for bad in ["0:0:10", "10:5:0", "a", "1:2", "nan"] {
            assert!(parse_snr_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn counts() {
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert_eq!(parse_count("250"), Ok(250));
        assert!(parse_count("0").is_err());
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
    }

    #[test]
    fn usage_errors() {
        let argv = |s: &str| s.split_whitespace().map(String::from).collect::<Vec<_>>();
        assert_eq!(run(argv("ris-ask moments --N 0")), EXIT_USAGE);
        assert_eq!(run(argv("ris-ask optimize --M 3 --side two")), EXIT_USAGE);
        assert_eq!(run(argv("ris-ask bogus")), EXIT_USAGE);
        assert_eq!(run(argv("ris-ask sweep --snr 5:0:10")), EXIT_USAGE);
    }

    #[test]
    fn later_flags_override() {
        let cli = Cli::try_parse_from(["ris-ask", "moments", "--N=32", "--N", "64"]).unwrap();
        match cli.command {
            Command::Moments(a) => assert_eq!(a.n, 64),
            _ => unreachable!(),
        }
    }
}
