//! Command-line driver: argument parsing, commands and output files.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error,
//! 3 a validation check failed.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{Mode, Pool, RunConfig, Snr};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
    #[error("i/o failure: {0}")]
    Io(String),
    #[error("{0} validation check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) | CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::ChecksFailed(_) => 3,
        }
    }
}

impl From<hicap::Error> for CliError {
    fn from(e: hicap::Error) -> Self {
        match e {
            hicap::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hicap",
    version,
    about = "Hierarchical compressive random access simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte-Carlo experiment; writes metrics.csv, summary.csv, manifest.json.
    Simulate(SimulateArgs),
    /// Simulate over a grid; without --over, n = 2^10..2^13 by SNR = inf, 10, 0, -10 dB.
    Sweep(SweepArgs),
    /// Tabulate the analytic bounds on a grid; writes bounds.csv.
    Bounds(BoundsArgs),
    /// Run the self-checks; writes validation.csv, exits 3 if any fails.
    Validate(ValidateArgs),
    /// Re-run the command recorded in a manifest.
    Rerun(RerunArgs),
}

/// Overrides for every scenario field. Unset flags keep the config file value.
#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Scenario file in `key = value` format.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// SNR in dB, or `inf` for noise free.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<Snr>,
    /// Same as `--snr-db inf`.
    #[arg(long, conflicts_with = "snr_db")]
    pub noise_free: bool,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub k_s: Option<usize>,
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub p_u: Option<f64>,
    #[arg(long)]
    pub kbar_u: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Per-slot energy threshold of the threshold detector.
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, value_enum)]
    pub birthday_pool: Option<Pool>,
}

impl ScenarioArgs {
    /// Config file (or defaults) with the flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! over {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    c.$field = v;
                }
            )*};
        }
        over!(
            seed,
            trials,
            n,
            s,
            k_s,
            t,
            p_u,
            mode,
            xi,
            iterations,
            birthday_pool
        );
        if let Some(Snr(v)) = self.snr_db {
            c.snr_db = v;
        }
        if self.noise_free {
            c.snr_db = None;
        }
        if self.kbar_u.is_some() {
            c.kbar_u = self.kbar_u;
        }
        if self.m.is_some() {
            c.m = self.m;
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Sweep axis as `key=v1,v2,...` with key one of n, snr_db, t, kbar_u. Repeatable.
    #[arg(long = "over", value_name = "KEY=LIST")]
    pub over: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    /// Signal dimensions.
    #[arg(long, value_delimiter = ',', default_value = "1024")]
    pub n: Vec<usize>,
    /// Measurements per sub-channel.
    #[arg(long, value_delimiter = ',', default_value = "16")]
    pub m: Vec<usize>,
    /// Users (per sub-channel for the concentration bounds, in total for the capture bound).
    #[arg(long, value_delimiter = ',', default_value = "4")]
    pub k_u: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub t: Vec<usize>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.5",
        allow_hyphen_values = true
    )]
    pub eps: Vec<f64>,
    /// Load level of the capture and missed-detection bounds.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub x: Vec<usize>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.5",
        allow_hyphen_values = true
    )]
    pub xi: Vec<f64>,
    #[arg(long, default_value_t = 8)]
    pub s: usize,
    #[arg(long, default_value_t = 4)]
    pub k_s: usize,
    /// SNR in dB for the missed-detection bound, or `inf`.
    #[arg(long, default_value = "inf", allow_hyphen_values = true)]
    pub snr_db: Snr,
    /// Monte-Carlo draws for the energy distribution term.
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    /// Constant of the concentration term of the missed-detection bound.
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    /// Constant of the noise term of the missed-detection bound.
    #[arg(long, default_value_t = 1.0)]
    pub c2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Scenario file; `n`, `s`, `k_s`, `kbar_u`, `m` and `seed` are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Trials per concentration grid point.
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 100_000)]
    pub load_trials: usize,
    #[arg(long, default_value_t = 20_000)]
    pub noncollided_trials: usize,
    #[arg(long, default_value_t = 10_000)]
    pub isometry_draws: usize,
    #[arg(long, default_value_t = 1000)]
    pub equivalence_instances: usize,
    /// Replaces the operator normalization (fault injection).
    #[arg(long, hide = true)]
    pub operator_scale: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    pub manifest: PathBuf,
    /// Defaults to the directory holding the manifest.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Caps the worker pool at `HICAP_THREADS` when set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("HICAP_THREADS") else {
        return Ok(());
    };
    let threads: usize = v.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        CliError::Config(format!(
            "HICAP_THREADS must be a positive integer, got `{v}`"
        ))
    })?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    log::info!("HICAP_THREADS={threads} ignored: built without the parallel feature");
    Ok(())
}

/// Runs one command and maps the outcome to an exit code.
pub fn run(cli: Cli) -> i32 {
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Bounds(a) => commands::bounds(&a),
        Command::Validate(a) => commands::validate(&a),
        Command::Rerun(a) => commands::rerun(&a),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("hicap: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "n = 2048\nseed = 3\nsnr_db = 5\nkbar_u = 3\n").unwrap();
        let args = ScenarioArgs {
            config: Some(path),
            seed: Some(9),
            noise_free: true,
            m: Some(8),
            ..ScenarioArgs::default()
        };
        let c = args.resolve().unwrap();
        assert_eq!(
            (c.n, c.seed, c.snr_db, c.kbar_u, c.m),
            (2048, 9, None, Some(3), Some(8))
        );
    }

    #[test]
    fn snr_flag_accepts_negative_and_inf() {
        let cli = Cli::try_parse_from(["hicap", "simulate", "--snr-db", "-10"]).unwrap();
        let Command::Simulate(a) = cli.command else {
            panic!()
        };
        assert_eq!(a.scenario.resolve().unwrap().snr_db, Some(-10.0));
        let cli = Cli::try_parse_from(["hicap", "simulate", "--snr-db", "inf"]).unwrap();
        let Command::Simulate(a) = cli.command else {
            panic!()
        };
        assert_eq!(a.scenario.resolve().unwrap().snr_db, None);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Runtime(String::new()).exit_code(), 1);
        assert_eq!(CliError::Io(String::new()).exit_code(), 1);
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::ChecksFailed(1).exit_code(), 3);
        assert_eq!(
            CliError::from(hicap::Error::Config("x".into())).exit_code(),
            2
        );
        assert_eq!(
            CliError::from(hicap::Error::RankDeficient { support: 3, m: 2 }).exit_code(),
            1
        );
    }
}
